"""Gibbs sampler for sparse linear and logistic regression under the horseshoe prior.

Model::

    theta_p | lambda_p, tau ~ Normal(0, tau^2 lambda_p^2)
    lambda_p ~ half-Cauchy(0, 1),  tau ~ half-Cauchy(0, tau_scale)

Each half-Cauchy is written as an inverse-gamma mixture with one auxiliary
variable (``nu_p`` for ``lambda_p``, ``xi`` for ``tau``), which makes every
scale conditional inverse-gamma.  Linear regression adds
``sigma^2 ~ InvGamma(a, b)``; logistic regression adds Polya-Gamma weights
``omega_n``.  One sweep updates, in order: ``theta``, ``(lambda, nu)``,
``(tau, xi)``, then ``sigma^2`` or ``omega``.
"""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field, fields

import numpy as np
from scipy import sparse

from .cg import DEFAULT_REL_TOL
from .data import Dataset
from .diagnostics import ChainTrace
from .errors import ConfigError, NumericalError
from .gaussian import SAMPLERS, StructuredGaussianTarget, sample
from .linalg import DenseMatrix, SparseMatrix
from .polyagamma import sample_pg1
from .rng import make_rng


@dataclass
class GibbsConfig:
    sampler: str = "cg"
    preconditioner: str = "prior"
    cg_rel_tol: float = DEFAULT_REL_TOL
    cg_max_iters: int | None = None
    warm_start: bool = True
    warmup: int = 500
    samples: int = 1000
    seed: int = 0
    standardize: bool = False
    intercept: bool = False
    intercept_lambda: float = 1e6
    tau_scale: float = 1.0
    sigma2_shape: float = 1e-2
    sigma2_rate: float = 1e-2
    fixed_sigma2: float | None = None
    record_scales: bool = False

    def __post_init__(self):
        if self.sampler not in SAMPLERS:
            raise ConfigError(f"unknown sampler {self.sampler!r}; choose one of {SAMPLERS}")
        if self.warmup < 0 or self.samples < 1:
            raise ConfigError(f"need warmup >= 0 and samples >= 1, got {self.warmup}, {self.samples}")
        for name in ("cg_rel_tol", "tau_scale", "sigma2_shape", "sigma2_rate", "intercept_lambda"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if self.fixed_sigma2 is not None and not self.fixed_sigma2 > 0:
            raise ConfigError(f"fixed_sigma2 must be positive, got {self.fixed_sigma2}")

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError(f"unknown Gibbs settings: {', '.join(unknown)}")
        return cls(**d)

    def to_dict(self):
        return asdict(self)


@dataclass
class ShrinkageState:
    """Current values of all blocks.

    ``theta`` is on the working (possibly standardised) scale and, when an
    intercept is fitted, its first ``n_fixed`` entries are unpenalised.
    ``lam`` and ``nu`` cover only the penalised coefficients.
    """

    theta: np.ndarray
    lam: np.ndarray
    nu: np.ndarray
    tau: float
    xi: float
    sigma2: float | None = None
    omega: np.ndarray | None = None
    n_fixed: int = 0
    iteration: int = 0
    last_cg_iterations: int = 0
    last_cg_converged: bool = True

    @property
    def penalized(self):
        return self.theta[self.n_fixed:]

    @classmethod
    def initial(cls, data: Dataset, n_fixed=0, sigma2=1.0):
        p = data.p - n_fixed
        return cls(
            theta=np.zeros(data.p),
            lam=np.ones(p),
            nu=np.ones(p),
            tau=1.0,
            xi=1.0,
            sigma2=sigma2 if data.family == "gaussian" else None,
            omega=np.full(data.n, 0.25) if data.family == "binomial" else None,
            n_fixed=n_fixed,
        )


def _inv_gamma(shape, rate, rng):
    size = np.shape(rate) or None
    return rate / rng.standard_gamma(shape, size=size)


def conditional_target(state: ShrinkageState, data: Dataset, config: GibbsConfig):
    """The Gaussian conditional of ``theta`` given everything else."""
    lam = np.concatenate([np.full(state.n_fixed, config.intercept_lambda), state.lam])
    if data.family == "gaussian":
        omega = np.full(data.n, 1.0 / state.sigma2)
        y = data.y
    else:
        omega = state.omega
        # X^T Omega (kappa / omega) = X^T kappa
        y = (data.y - 0.5) / omega
    return StructuredGaussianTarget(data.X, omega, y, state.tau, lam)


def update_theta(state: ShrinkageState, data: Dataset, config: GibbsConfig, rng):
    """Draw ``theta`` from its Gaussian conditional with the configured sampler.

    Returns ``(theta, cg_report)``; the report is ``None`` for the direct and
    Bhattacharya samplers.
    """
    target = conditional_target(state, data, config)
    kwargs = {}
    if config.sampler == "cg":
        kwargs = dict(
            precond=config.preconditioner,
            rel_tol=config.cg_rel_tol,
            x0=state.theta if config.warm_start else None,
            max_iters=config.cg_max_iters or 2 * data.p + 10,
        )
    return sample(target, rng, config.sampler, **kwargs)


def update_local_scales(state: ShrinkageState, rng):
    """Draw ``(lambda, nu)``: ``lambda_p^2 ~ IG(1, 1/nu_p + theta_p^2/(2 tau^2))``, then
    ``nu_p ~ IG(1, 1 + 1/lambda_p^2)``."""
    theta = state.penalized
    lam2 = _inv_gamma(1.0, 1.0 / state.nu + theta ** 2 / (2.0 * state.tau ** 2), rng)
    nu = _inv_gamma(1.0, 1.0 + 1.0 / lam2, rng)
    return np.sqrt(lam2), nu


def update_global_scale(state: ShrinkageState, rng, tau_scale=1.0):
    """Draw ``(tau, xi)``.

    ``tau^2 ~ IG((P + 1)/2, 1/xi + sum_p (theta_p/lambda_p)^2 / 2)`` and
    ``xi ~ IG(1, 1/tau_scale^2 + 1/tau^2)``; the data enter only through
    ``sum_p (theta_p/lambda_p)^2``.
    """
    ratio = state.penalized / state.lam
    p = ratio.size
    tau2 = _inv_gamma(0.5 * (p + 1), 1.0 / state.xi + 0.5 * (ratio @ ratio), rng)
    xi = _inv_gamma(1.0, 1.0 / tau_scale ** 2 + 1.0 / tau2, rng)
    return float(np.sqrt(tau2)), float(xi)


def update_sigma2(state: ShrinkageState, data: Dataset, rng, shape=1e-2, rate=1e-2):
    """Conjugate inverse-gamma draw of the noise variance given the residuals."""
    if data.n == 0:
        return float(_inv_gamma(shape, rate, rng))
    resid = data.y - data.X.matvec(state.theta)
    return float(_inv_gamma(shape + 0.5 * data.n, rate + 0.5 * (resid @ resid), rng))


def update_polya_gamma(state: ShrinkageState, data: Dataset, rng):
    """``omega_n ~ PG(1, (X theta)_n)``, drawn exactly."""
    return sample_pg1(data.X.matvec(state.theta), rng)


def sweep(state: ShrinkageState, data: Dataset, config: GibbsConfig, rng):
    """One full Gibbs sweep, updating ``state`` in place."""
    state.theta, report = update_theta(state, data, config, rng)
    state.last_cg_iterations = report.iterations if report is not None else 0
    state.last_cg_converged = report.converged if report is not None else True
    state.lam, state.nu = update_local_scales(state, rng)
    state.tau, state.xi = update_global_scale(state, rng, config.tau_scale)
    if data.family == "gaussian":
        if config.fixed_sigma2 is None:
            state.sigma2 = update_sigma2(state, data, rng, config.sigma2_shape, config.sigma2_rate)
    else:
        state.omega = update_polya_gamma(state, data, rng)
    state.iteration += 1
    return state


@dataclass
class DesignTransform:
    """Maps between the user's design and the working design the sampler sees."""

    center: np.ndarray
    scale: np.ndarray
    intercept: bool

    @property
    def n_fixed(self):
        return int(self.intercept)

    def to_original(self, theta_work):
        beta = theta_work[self.n_fixed:] / self.scale
        if not self.intercept:
            return beta
        a = theta_work[0] - self.center @ beta
        return np.concatenate([[a], beta])


def prepare_design(data: Dataset, config: GibbsConfig):
    """Apply optional standardisation and intercept column; return ``(working data, transform)``."""
    p = data.p
    center = np.zeros(p)
    scale = np.ones(p)
    X = data.X
    if config.standardize:
        if data.is_sparse:
            sq = np.asarray(X.csr.multiply(X.csr).mean(axis=0)).ravel()
            mean = np.asarray(X.csr.mean(axis=0)).ravel()
        else:
            dense = X.array
            sq = (dense ** 2).mean(axis=0)
            mean = dense.mean(axis=0)
        sd = np.sqrt(np.maximum(sq - mean ** 2, 0.0))
        if np.any(sd == 0):
            raise ConfigError(
                f"cannot standardise constant column {data.names[int(np.argmin(sd))]!r}"
            )
        scale = sd
        if config.intercept and not data.is_sparse:
            center = mean
        if data.is_sparse:
            X = data.X.column_scaled(1.0 / scale)
        else:
            X = DenseMatrix((dense - center) / scale)
    if config.intercept:
        if isinstance(X, SparseMatrix):
            X = SparseMatrix.from_scipy(sparse.hstack([np.ones((data.n, 1)), X.csr]))
        else:
            X = DenseMatrix(np.column_stack([np.ones(data.n), X.array]))
    work = Dataset(X, data.y, data.family)
    return work, DesignTransform(center, scale, config.intercept)


def trace_names(p, config: GibbsConfig, family):
    names = (["intercept"] if config.intercept else []) + [f"theta_{j + 1}" for j in range(p)]
    names.append("tau")
    if family == "gaussian":
        names.append("sigma2")
    if config.record_scales:
        names += [f"lambda_{j + 1}" for j in range(p)]
    return names


def run_gibbs(data: Dataset, config: GibbsConfig, rng=None, init: ShrinkageState | None = None):
    """Run warmup plus sampling sweeps and return the post-warmup :class:`ChainTrace`.

    Coefficients are reported on the original scale.  Given the same seed
    (or an identically seeded ``rng``) the trace is bit-identical.
    """
    rng = make_rng(config.seed) if rng is None else rng
    work, transform = prepare_design(data, config)
    if init is None:
        sigma2 = config.fixed_sigma2 or (float(np.var(data.y)) if data.n > 1 and np.var(data.y) > 0
                                         else 1.0)
        state = ShrinkageState.initial(work, transform.n_fixed, sigma2)
    else:
        state = init
    names = trace_names(data.p, config, data.family)
    draws = np.empty((config.samples, len(names)))
    seconds = np.empty(config.samples)
    cg_iters = np.zeros(config.samples, dtype=np.int64)
    nonconverged = 0
    warm_cg = []

    total = config.warmup + config.samples
    for i in range(total):
        t0 = time.perf_counter()
        try:
            sweep(state, work, config, rng)
        except NumericalError as exc:
            raise type(exc)(f"sweep {i}: {exc}") from exc
        nonconverged += not state.last_cg_converged
        if i < config.warmup:
            warm_cg.append(state.last_cg_iterations)
            continue
        s = i - config.warmup
        row = [transform.to_original(state.theta), [state.tau]]
        if data.family == "gaussian":
            row.append([state.sigma2])
        if config.record_scales:
            row.append(state.lam)
        draws[s] = np.concatenate(row)
        cg_iters[s] = state.last_cg_iterations
        seconds[s] = time.perf_counter() - t0

    meta = {
        "sampler": config.sampler,
        "cg_iterations": cg_iters,
        "warmup_cg_iterations": np.array(warm_cg, dtype=np.int64),
        "cg_nonconverged": nonconverged,
        "final_state": state,
    }
    return ChainTrace(names, draws, seconds, meta)


# -- simulation checks ---------------------------------------------------------


def prior_draws(p, n_draws, rng, config: GibbsConfig | None = None):
    """Independent draws of ``(theta, lambda, tau, sigma2)`` from the prior."""
    config = config or GibbsConfig()
    tau = config.tau_scale * np.abs(rng.standard_cauchy(n_draws))
    lam = np.abs(rng.standard_cauchy((n_draws, p)))
    theta = rng.standard_normal((n_draws, p)) * tau[:, None] * lam
    sigma2 = _inv_gamma(config.sigma2_shape, config.sigma2_rate * np.ones(n_draws), rng)
    return {"theta": theta, "lambda": lam, "tau": tau, "sigma2": sigma2}


def successive_conditional(X, family, config: GibbsConfig, n_sweeps, rng):
    """Alternate Gibbs sweeps with fresh data drawn from the likelihood.

    The stationary distribution of ``(theta, lambda, tau, sigma2)`` is the
    prior, which makes this a joint test of every conditional update.
    """
    X = DenseMatrix(X) if not isinstance(X, (DenseMatrix, SparseMatrix)) else X
    n, p = X.shape
    start = prior_draws(p, 1, rng, config)
    state = ShrinkageState(
        theta=start["theta"][0],
        lam=start["lambda"][0],
        nu=_inv_gamma(1.0, 1.0 + 1.0 / start["lambda"][0] ** 2, rng),
        tau=float(start["tau"][0]),
        xi=float(_inv_gamma(1.0, 1.0 / config.tau_scale ** 2 + 1.0 / start["tau"][0] ** 2, rng)),
        sigma2=float(start["sigma2"][0]) if family == "gaussian" else None,
    )
    out = {
        "theta": np.empty((n_sweeps, p)),
        "lambda": np.empty((n_sweeps, p)),
        "tau": np.empty(n_sweeps),
        "sigma2": np.empty(n_sweeps),
    }
    y = _simulate_response(X, state, family, rng)
    data = Dataset(X, y, family)
    if family == "binomial":
        state.omega = update_polya_gamma(state, data, rng)
    for i in range(n_sweeps):
        sweep(state, data, config, rng)
        data.y = _simulate_response(X, state, family, rng)
        out["theta"][i] = state.theta
        out["lambda"][i] = state.lam
        out["tau"][i] = state.tau
        out["sigma2"][i] = state.sigma2 if family == "gaussian" else np.nan
    return out


def _simulate_response(X, state, family, rng):
    eta = X.matvec(state.theta)
    if family == "gaussian":
        return eta + np.sqrt(state.sigma2) * rng.standard_normal(eta.size)
    return (rng.random(eta.size) < 1.0 / (1.0 + np.exp(-eta))).astype(float)
