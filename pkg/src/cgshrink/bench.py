"""Per-draw timing of the three structured-Gaussian samplers over a size grid."""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from .errors import ConfigError
from .gaussian import SAMPLERS, StructuredGaussianTarget, sample
from .linalg import DenseMatrix
from .rng import make_rng

DEFAULT_MEMORY_LIMIT = 2 * 1024 ** 3


def sparse_truth_target(n, p, k, seed=0, tau=0.01, signal_scale=100.0,
                        null_range=(1e-3, 1e-1), noise=1.0):
    """A coefficient conditional shaped like a converged horseshoe posterior.

    ``k`` signal coordinates (the first ``k``) carry local scale
    ``signal_scale`` so ``tau * lambda = 1``; the rest get log-uniform local
    scales on ``null_range`` and are shrunk hard.  ``X`` is standard normal,
    ``omega = 1`` and ``y = X theta + noise`` with signals ``+-U(1, 3)``.
    Returns ``(target, theta_true)``.
    """
    if not 0 <= k <= p:
        raise ConfigError(f"signal count k={k} must lie in [0, {p}]")
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    theta = np.zeros(p)
    theta[:k] = rng.choice([-1.0, 1.0], size=k) * rng.uniform(1.0, 3.0, size=k)
    y = X @ theta + noise * rng.standard_normal(n)
    lo, hi = np.log(null_range[0]), np.log(null_range[1])
    lam = np.exp(rng.uniform(lo, hi, size=p))
    lam[:k] = signal_scale
    target = StructuredGaussianTarget(DenseMatrix(X), np.ones(n), y, tau, lam)
    return target, theta


def memory_estimate(n, p, samplers=SAMPLERS):
    """Peak bytes for one draw: the design plus each sampler's dense workspace."""
    base = 8 * n * p
    work = {"direct": 8 * p * p, "bhattacharya": 8 * (n * n + n * p), "cg": 8 * 6 * p}
    return base + max(work[s] for s in samplers)


@dataclass
class BenchRow:
    n: int
    p: int
    k: int
    threads: int
    sampler: str
    seconds_per_draw: float
    draws: int
    cg_iterations: float = float("nan")

    def to_dict(self):
        return dict(self.__dict__)


def time_sampler(target, method, draws, rng, **kw):
    """Median per-draw wall-clock over ``draws`` repetitions, plus mean CG iterations."""
    times, iters = [], []
    for _ in range(draws):
        t0 = time.perf_counter()
        _, rep = sample(target, rng, method, **kw)
        times.append(time.perf_counter() - t0)
        if rep is not None:
            iters.append(rep.iterations)
    return float(np.median(times)), (float(np.mean(iters)) if iters else float("nan"))


def run_bench(grid, threads=(1,), samplers=SAMPLERS, draws=3, seed=0, rel_tol=1e-10,
              memory_limit=DEFAULT_MEMORY_LIMIT):
    """Time each sampler at each ``(N, P, K)`` grid point and thread count.

    Grid points whose memory estimate exceeds ``memory_limit`` bytes are
    refused up front.
    """
    for s in samplers:
        if s not in SAMPLERS:
            raise ConfigError(f"unknown sampler {s!r}; choose from {', '.join(SAMPLERS)}")
    for n, p, k in grid:
        need = memory_estimate(n, p, samplers)
        if need > memory_limit:
            raise ConfigError(
                f"grid point N={n}, P={p} needs about {need / 2 ** 20:.0f} MiB, over the "
                f"{memory_limit / 2 ** 20:.0f} MiB limit"
            )
    rows = []
    for n, p, k in grid:
        target, _ = sparse_truth_target(n, p, k, seed=seed)
        for t in threads:
            with threadpool_limits(limits=int(t)):
                for method in samplers:
                    rng = make_rng(seed)
                    kw = {"rel_tol": rel_tol} if method == "cg" else {}
                    sample(target, rng, method, **kw)  # warm caches
                    sec, it = time_sampler(target, method, draws, rng, **kw)
                    rows.append(BenchRow(n, p, k, int(t), method, sec, draws, it))
    return rows


def speedups(rows, baseline="direct", method="cg"):
    """``baseline / method`` per-draw time ratio for each ``(N, P, K, threads)``."""
    table = {}
    for r in rows:
        table.setdefault((r.n, r.p, r.k, r.threads), {})[r.sampler] = r.seconds_per_draw
    return {key: v[baseline] / v[method] for key, v in table.items()
            if baseline in v and method in v}


def write_bench(rows, json_path=None, csv_path=None):
    data = [r.to_dict() for r in rows]
    if json_path is not None:
        Path(json_path).write_text(json.dumps(data, sort_keys=True, indent=2) + "\n",
                                   encoding="utf-8")
    if csv_path is not None:
        with Path(csv_path).open("w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(data[0]) if data else [],
                               lineterminator="\n")
            w.writeheader()
            w.writerows(data)
    return data
