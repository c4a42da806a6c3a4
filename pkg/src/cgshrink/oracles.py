"""Closed-form and brute-force reference computations.

Ridge regression, exhaustive best-subset selection, exact spike-and-slab
enumeration with a conjugate Gaussian slab, and the score statistic
``u^T I^{-1} u`` evaluated along two independent routes.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .cg import cg_solve
from .errors import ConfigError, ConsistencyError, DimensionError
from .linalg import as_operator, cho_solve, cholesky

BEST_SUBSET_MAX_P = 20
SPIKE_SLAB_MAX_P = 15
SCORE_RTOL = 1e-8


def _design(X, y):
    X = as_operator(X).to_dense()
    y = np.asarray(y, dtype=np.float64).ravel()
    if X.shape[0] != y.size:
        raise DimensionError(f"design has {X.shape[0]} rows but response has {y.size} entries")
    return X, y


def ridge_fit(X, y, penalty) -> np.ndarray:
    """``(X^T X + diag(penalty))^{-1} X^T y`` by Cholesky.  ``penalty`` may be a scalar."""
    X, y = _design(X, y)
    p = X.shape[1]
    pen = np.broadcast_to(np.asarray(penalty, dtype=np.float64), (p,))
    if np.any(~(pen > 0)):
        raise ConfigError("ridge penalties must be positive")
    a = X.T @ X
    a[np.diag_indices(p)] += pen
    return cho_solve(cholesky(a, check=False), X.T @ y)


def _lstsq_rss(X, y, support):
    if not support:
        return float(y @ y), np.zeros(0)
    xs = X[:, support]
    coef, *_ = np.linalg.lstsq(xs, y, rcond=None)
    r = y - xs @ coef
    return float(r @ r), coef


@dataclass
class SubsetResult:
    support: tuple
    coef: np.ndarray
    rss: float
    n_evaluated: int

    def to_dict(self):
        return {"support": list(self.support), "coef": self.coef.tolist(), "rss": self.rss,
                "n_evaluated": self.n_evaluated}


def best_subset_brute(X, y, k, allow_large=False) -> SubsetResult:
    """Minimise ``||y - X theta||^2`` over supports of size at most ``k`` by enumeration.

    Returns the full-length coefficient vector.  Ties (within a relative
    ``1e-12``) go to the lexicographically smallest support, since supports
    are visited in size-then-lexicographic order and only strict improvements
    replace the incumbent.  ``P > 20`` is refused unless ``allow_large``.
    """
    X, y = _design(X, y)
    p = X.shape[1]
    if not 0 <= k <= p:
        raise ConfigError(f"sparsity budget k={k} must lie in [0, {p}]")
    if p > BEST_SUBSET_MAX_P and not allow_large:
        raise ConfigError(
            f"best subset over P={p} predictors enumerates "
            f"{sum(math.comb(p, j) for j in range(k + 1))} supports; the problem is NP-hard "
            f"and enumeration is limited to P <= {BEST_SUBSET_MAX_P}. Pass allow_large=True "
            "(or --allow-large) to run anyway"
        )
    best_rss, best_support, best_coef = float(y @ y), (), np.zeros(0)
    count = 1
    for size in range(1, k + 1):
        for support in itertools.combinations(range(p), size):
            rss, coef = _lstsq_rss(X, y, list(support))
            count += 1
            if rss < best_rss * (1 - 1e-12) - 1e-300:
                best_rss, best_support, best_coef = rss, support, coef
    theta = np.zeros(p)
    theta[list(best_support)] = best_coef
    return SubsetResult(best_support, theta, best_rss, count)


@dataclass
class SpikeSlabResult:
    """Posterior over inclusion vectors; ``configs[i]`` is a 0/1 row of length P."""

    configs: np.ndarray
    log_marginal: np.ndarray
    probabilities: np.ndarray
    local_modes: list = field(default_factory=list)

    @property
    def n_local_modes(self):
        return len(self.local_modes)

    def inclusion_probabilities(self):
        return self.probabilities @ self.configs

    def map_config(self):
        return self.configs[int(np.argmax(self.probabilities))]

    def to_dict(self):
        return {
            "n_configs": int(self.configs.shape[0]),
            "probabilities": self.probabilities.tolist(),
            "log_marginal": self.log_marginal.tolist(),
            "inclusion_probabilities": self.inclusion_probabilities().tolist(),
            "map_config": self.map_config().astype(int).tolist(),
            "n_local_modes": self.n_local_modes,
            "local_modes": [self.configs[i].astype(int).tolist() for i in self.local_modes],
        }


def _log_evidence(X, y, support, slab_scale, sigma2):
    """log N(y; 0, sigma2 I + slab^2 X_g X_g^T), via the P-side (Woodbury) form."""
    n = y.size
    base = -0.5 * n * math.log(2 * math.pi * sigma2) - 0.5 * float(y @ y) / sigma2
    if not support:
        return base
    xs = X[:, support]
    a = xs.T @ xs / sigma2
    a[np.diag_indices(len(support))] += 1.0 / slab_scale ** 2
    l = cholesky(a, check=False)
    b = xs.T @ y / sigma2
    w = cho_solve(l, b)
    logdet = 2.0 * np.log(np.diag(l)).sum() + len(support) * math.log(slab_scale ** 2)
    return base - 0.5 * logdet + 0.5 * float(b @ w)


def spike_slab_enumerate(X, y, inclusion_prob=0.5, slab_scale=1.0, sigma2=1.0,
                         allow_large=False) -> SpikeSlabResult:
    """Exact posterior of ``gamma`` for ``y ~ N(X_gamma theta_gamma, sigma2 I)``,
    ``theta_gamma ~ N(0, slab_scale^2 I)``, ``gamma_p ~ Bernoulli(inclusion_prob)``.

    Configurations are ordered by their binary index (bit ``p`` is predictor
    ``p``).  A local mode is a configuration with strictly higher posterior
    mass than each of its ``P`` single-bit-flip neighbours.
    """
    X, y = _design(X, y)
    p = X.shape[1]
    if not 0 < inclusion_prob < 1:
        raise ConfigError(f"inclusion probability must lie strictly in (0, 1), got {inclusion_prob}")
    if not (slab_scale > 0 and sigma2 > 0):
        raise ConfigError("slab scale and noise variance must be positive")
    if p > SPIKE_SLAB_MAX_P and not allow_large:
        raise ConfigError(
            f"enumeration over 2^{p} configurations is limited to P <= {SPIKE_SLAB_MAX_P}; "
            "pass allow_large=True (or --allow-large) to run anyway"
        )
    n_cfg = 1 << p
    configs = ((np.arange(n_cfg)[:, None] >> np.arange(p)) & 1).astype(np.float64)
    log_prior_in, log_prior_out = math.log(inclusion_prob), math.log1p(-inclusion_prob)
    logm = np.empty(n_cfg)
    for i in range(n_cfg):
        support = np.flatnonzero(configs[i]).tolist()
        size = len(support)
        logm[i] = (_log_evidence(X, y, support, slab_scale, sigma2)
                   + size * log_prior_in + (p - size) * log_prior_out)
    prob = np.exp(logm - logsumexp(logm))
    idx = np.arange(n_cfg)
    modes = []
    for i in idx:
        neighbours = i ^ (1 << np.arange(p))
        if np.all(logm[i] > logm[neighbours]):
            modes.append(int(i))
    return SpikeSlabResult(configs, logm, prob, modes)


@dataclass
class ScoreResult:
    statistic: float
    cholesky_value: float
    cg_value: float
    relative_gap: float
    cg_iterations: int
    condition_estimate: float

    def to_dict(self):
        return dict(self.__dict__)

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)


def score_statistic(information, u, rtol=SCORE_RTOL, cg_rel_tol=1e-12) -> ScoreResult:
    """Score statistic ``u^T I^{-1} u`` computed twice and cross-checked.

    Route one solves with a Cholesky factor of ``I``.  Route two solves
    ``I q = u`` by conjugate gradient and returns ``q^T I q``.  The two must
    agree within ``rtol`` (relative) or :class:`ConsistencyError` is raised.
    The CG solve's Lanczos condition estimate of ``I`` is reported.
    """
    op = as_operator(information)
    u = np.asarray(u, dtype=np.float64).ravel()
    if op.shape != (u.size, u.size):
        raise DimensionError(f"information is {op.shape[0]}x{op.shape[1]} but score has length {u.size}")
    if not np.any(u):
        return ScoreResult(0.0, 0.0, 0.0, 0.0, 0, float("nan"))
    direct = float(u @ cho_solve(cholesky(op.to_dense()), u))
    rep = cg_solve(op, u, rel_tol=cg_rel_tol, max_iters=10 * u.size)
    q = rep.solution
    via_cg = float(q @ op.matvec(q))
    gap = abs(direct - via_cg) / max(abs(direct), np.finfo(float).tiny)
    if gap > rtol:
        raise ConsistencyError(
            f"score statistic routes disagree: Cholesky {direct!r} vs CG {via_cg!r} "
            f"(relative gap {gap:.2e} > {rtol:.0e})"
        )
    return ScoreResult(direct, direct, via_cg, gap, rep.iterations, rep.condition_estimate())
