import numpy as np
import pytest

from cgshrink.rng import make_rng

_criteria = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.fixture
def rng():
    return make_rng(20240611)


@pytest.fixture
def record_criterion(request):
    """Call with a detail string; the pass/fail line is printed in the terminal summary."""
    marker = request.node.get_closest_marker("criterion")
    entry = {"title": marker.args[1], "detail": ""}
    _criteria[marker.args[0]] = entry

    def record(detail):
        entry["detail"] = detail

    return record


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or rep.when != "call":
        return
    entry = _criteria.setdefault(marker.args[0], {"title": marker.args[1], "detail": ""})
    entry["passed"] = rep.passed
    entry["seconds"] = rep.duration


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_criteria):
        e = _criteria[num]
        status = "PASS" if e.get("passed") else "FAIL"
        secs = e.get("seconds", float("nan"))
        terminalreporter.write_line(
            f"criterion {num:>2} {status}  {e['title']} ({secs:.1f}s) {e['detail']}".rstrip()
        )


def random_target(rng, n, p, tau=0.7, sparse=False):
    from cgshrink.gaussian import StructuredGaussianTarget
    from cgshrink.linalg import DenseMatrix, SparseMatrix

    X = rng.standard_normal((n, p))
    if sparse:
        X[rng.random((n, p)) < 0.6] = 0.0
        X = SparseMatrix.from_dense(X)
    else:
        X = DenseMatrix(X)
    omega = rng.uniform(0.5, 2.0, n)
    y = rng.standard_normal(n)
    lam = rng.uniform(0.3, 2.0, p)
    return StructuredGaussianTarget(X, omega, y, tau, lam)
