"""Random-walk Metropolis-Hastings and Hamiltonian Monte Carlo kernels.

HMC uses the Hamiltonian ``H(theta, p) = -log pi(theta) + p^T M^{-1} p / 2``
with a diagonal mass matrix ``M`` and the leapfrog (velocity Verlet)
integrator for ``d theta/dt = M^{-1} p``, ``dp/dt = grad log pi(theta)``.

The mass matrix can adapt during warmup: every ``adapt_every``-th iteration
the negative Hessian diagonal at the current state is added to a running
average, which (clamped to ``[clamp_lo, clamp_hi]``) becomes ``diag(M)``.
Adaptation stops when warmup ends.
"""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from .diagnostics import ChainTrace
from .errors import ConfigError

DIVERGENCE_THRESHOLD = 1000.0


class TargetDensity:
    """Unnormalised log-density with gradient and, optionally, Hessian diagonal."""

    dim: int

    def log_density(self, theta) -> float:
        raise NotImplementedError

    def grad(self, theta) -> np.ndarray:
        raise NotImplementedError

    def hess_diag(self, theta) -> np.ndarray:
        raise NotImplementedError

    @property
    def has_hess_diag(self):
        return type(self).hess_diag is not TargetDensity.hess_diag


def finite_difference_gradient(f, theta, h=1e-5):
    theta = np.asarray(theta, dtype=np.float64)
    g = np.empty_like(theta)
    for i in range(theta.size):
        step = h * max(1.0, abs(theta[i]))
        e = np.zeros_like(theta)
        e[i] = step
        g[i] = (f(theta + e) - f(theta - e)) / (2.0 * step)
    return g


def gradient_error(target: TargetDensity, theta) -> float:
    """Relative error ``|g - g_fd| / max(|g|, 1)`` of the analytic gradient."""
    g = target.grad(theta)
    fd = finite_difference_gradient(target.log_density, theta)
    return float(np.linalg.norm(g - fd) / max(np.linalg.norm(g), 1.0))


def check_gradient(target: TargetDensity, points, rtol=1e-5):
    """Raise ``AssertionError`` if any point's gradient error exceeds ``rtol``; return the errors."""
    errs = np.array([gradient_error(target, pt) for pt in points])
    if np.any(errs > rtol):
        worst = int(np.argmax(errs))
        raise AssertionError(
            f"gradient mismatch at point {worst}: relative error {errs[worst]:.2e} > {rtol:.0e}"
        )
    return errs


# -- built-in targets -----------------------------------------------------------


class GaussianTarget(TargetDensity):
    """``Normal(mean, precision^{-1})``; ``precision`` may be a vector (diagonal) or a matrix."""

    def __init__(self, mean, precision):
        self.mean = np.asarray(mean, dtype=np.float64)
        q = np.asarray(precision, dtype=np.float64)
        self.dim = self.mean.size
        self._diag = q.ndim == 1
        self.precision = q

    @classmethod
    def standard(cls, dim):
        return cls(np.zeros(dim), np.ones(dim))

    def _qx(self, d):
        return self.precision * d if self._diag else self.precision @ d

    def log_density(self, theta):
        d = np.asarray(theta) - self.mean
        return -0.5 * float(d @ self._qx(d))

    def grad(self, theta):
        return -self._qx(np.asarray(theta) - self.mean)

    def hess_diag(self, theta):
        return -(self.precision if self._diag else np.diag(self.precision)).copy()


class StudentTTarget(TargetDensity):
    """Independent Student-t coordinates with ``df`` degrees of freedom and unit scale."""

    def __init__(self, dim, df):
        self.dim = dim
        self.df = float(df)

    def log_density(self, theta):
        x = np.asarray(theta)
        return float(-0.5 * (self.df + 1.0) * np.log1p(x * x / self.df).sum())

    def grad(self, theta):
        x = np.asarray(theta)
        return -(self.df + 1.0) * x / (self.df + x * x)

    def hess_diag(self, theta):
        x = np.asarray(theta)
        return -(self.df + 1.0) * (self.df - x * x) / (self.df + x * x) ** 2


class PiecewiseConstantTarget(TargetDensity):
    """Density proportional to ``weights[i]`` on ``[edges[i], edges[i+1])``, zero elsewhere.

    One-dimensional and gradient-free; used to embed a discrete distribution
    in a continuous Metropolis-Hastings chain.
    """

    def __init__(self, edges, weights):
        self.edges = np.asarray(edges, dtype=np.float64)
        self.weights = np.asarray(weights, dtype=np.float64)
        self.dim = 1
        widths = np.diff(self.edges)
        self.probabilities = self.weights * widths / (self.weights * widths).sum()
        self._logw = np.log(self.weights)

    def bin_of(self, x):
        return np.searchsorted(self.edges, x, side="right") - 1

    def log_density(self, theta):
        x = float(np.asarray(theta).ravel()[0])
        i = int(self.bin_of(x))
        if i < 0 or i >= self.weights.size:
            return -math.inf
        return float(self._logw[i])


class ShrinkagePosterior(TargetDensity):
    """Horseshoe regression posterior on the unconstrained scale.

    Parameter vector: ``[intercept?, theta (P), log lambda (P), log tau,
    log sigma2?]``.  ``log sigma2`` is present for the gaussian family unless
    ``sigma2`` is fixed; the intercept (flat prior) only when requested.
    Jacobians of the log transforms are included.
    """

    def __init__(self, X, y, family="gaussian", sigma2=None, tau_scale=1.0,
                 sigma2_shape=1e-2, sigma2_rate=1e-2, intercept=False):
        from .linalg import as_operator

        self.X = as_operator(X)
        self.y = np.asarray(y, dtype=np.float64)
        self.family = family
        self.sigma2 = sigma2
        self.tau_scale = float(tau_scale)
        self.a0 = sigma2_shape
        self.b0 = sigma2_rate
        self.intercept = intercept
        self.n, self.p = self.X.shape
        self.free_sigma = family == "gaussian" and sigma2 is None
        self.dim = int(intercept) + 2 * self.p + 1 + int(self.free_sigma)
        xd = self.X.to_dense()
        self._colsq = (xd ** 2).sum(axis=0)
        self._xsq = xd ** 2

    def split(self, z):
        z = np.asarray(z, dtype=np.float64)
        i = int(self.intercept)
        a = z[0] if self.intercept else 0.0
        theta = z[i:i + self.p]
        u = z[i + self.p:i + 2 * self.p]
        v = z[i + 2 * self.p]
        w = z[i + 2 * self.p + 1] if self.free_sigma else None
        return a, theta, u, v, w

    def names(self):
        out = ["intercept"] if self.intercept else []
        out += [f"theta_{j + 1}" for j in range(self.p)]
        out += [f"log_lambda_{j + 1}" for j in range(self.p)]
        out.append("log_tau")
        if self.free_sigma:
            out.append("log_sigma2")
        return out

    def initial_point(self):
        z = np.zeros(self.dim)
        if self.free_sigma:
            z[-1] = math.log(max(float(np.var(self.y)), 1e-8))
        return z

    def _sigma2(self, w):
        return math.exp(w) if self.free_sigma else (self.sigma2 if self.sigma2 is not None else 1.0)

    def _pieces(self, z):
        a, theta, u, v, w = self.split(z)
        eta = self.X.matvec(theta) + a
        lam = np.exp(u)
        tau = math.exp(v)
        r = theta / (tau * lam)
        return a, theta, u, v, w, eta, lam, tau, r

    def log_density(self, z):
        a, theta, u, v, w, eta, lam, tau, r = self._pieces(z)
        if self.family == "gaussian":
            s2 = self._sigma2(w)
            resid = self.y - eta
            ll = -0.5 * self.n * math.log(s2) - 0.5 * (resid @ resid) / s2
        else:
            ll = float(self.y @ eta - np.logaddexp(0.0, eta).sum())
        lp = -self.p * v - u.sum() - 0.5 * (r @ r)
        lp += (u - np.logaddexp(0.0, 2.0 * u)).sum()
        lp += v - math.log1p((tau / self.tau_scale) ** 2)
        if self.free_sigma:
            lp += -self.a0 * w - self.b0 * math.exp(-w)
        return float(ll + lp)

    def grad(self, z):
        a, theta, u, v, w, eta, lam, tau, r = self._pieces(z)
        g = np.empty(self.dim)
        i = int(self.intercept)
        if self.family == "gaussian":
            s2 = self._sigma2(w)
            resid = self.y - eta
            score = resid / s2
        else:
            score = self.y - 1.0 / (1.0 + np.exp(-eta))
        if self.intercept:
            g[0] = score.sum()
        g[i:i + self.p] = self.X.rmatvec(score) - theta / (tau * lam) ** 2
        lam2 = lam * lam
        g[i + self.p:i + 2 * self.p] = r * r - 2.0 * lam2 / (1.0 + lam2)
        t2 = (tau / self.tau_scale) ** 2
        g[i + 2 * self.p] = -self.p + (r @ r) + 1.0 - 2.0 * t2 / (1.0 + t2)
        if self.free_sigma:
            rss = resid @ resid
            g[-1] = -0.5 * self.n + 0.5 * rss / s2 - self.a0 + self.b0 / s2
        return g

    def hess_diag(self, z):
        a, theta, u, v, w, eta, lam, tau, r = self._pieces(z)
        h = np.empty(self.dim)
        i = int(self.intercept)
        if self.family == "gaussian":
            s2 = self._sigma2(w)
            curv = np.full(self.n, 1.0 / s2)
        else:
            mu = 1.0 / (1.0 + np.exp(-eta))
            curv = mu * (1.0 - mu)
        if self.intercept:
            h[0] = -curv.sum()
        h[i:i + self.p] = -(curv @ self._xsq) - 1.0 / (tau * lam) ** 2
        lam2 = lam * lam
        h[i + self.p:i + 2 * self.p] = -2.0 * r * r - 4.0 * lam2 / (1.0 + lam2) ** 2
        t2 = (tau / self.tau_scale) ** 2
        h[i + 2 * self.p] = -2.0 * (r @ r) - 4.0 * t2 / (1.0 + t2) ** 2
        if self.free_sigma:
            resid = self.y - eta
            h[-1] = -0.5 * (resid @ resid) / s2 - self.b0 / s2
        return h


# -- Metropolis-Hastings --------------------------------------------------------


@dataclass
class KernelStats:
    nan_rejections: int = 0
    divergences: int = 0


@dataclass
class MHConfig:
    proposal_scale: float = 1.0

    def __post_init__(self):
        if not self.proposal_scale > 0:
            raise ConfigError(f"proposal_scale must be positive, got {self.proposal_scale}")

    @classmethod
    def scaled_for_dimension(cls, dim, base=2.38):
        """Proposal scale proportional to ``1/sqrt(dim)`` (variance proportional to ``1/dim``)."""
        return cls(base / math.sqrt(dim))


def _mh_step(target, theta, logp, scale, rng, stats=None):
    proposal = theta + scale * rng.standard_normal(theta.shape)
    logp_new = target.log_density(proposal)
    log_u = math.log(rng.random())
    if math.isnan(logp_new):
        if stats is not None:
            stats.nan_rejections += 1
        return theta, logp, False
    # symmetric proposal: q-terms cancel
    if logp_new >= logp or log_u < logp_new - logp:
        return proposal, logp_new, True
    return theta, logp, False


def mh_step(target: TargetDensity, current, proposal_scale, rng, stats=None):
    """One random-walk M-H step; returns ``(state, accepted)``.

    A proposal whose log-density is NaN is rejected and counted in
    ``stats.nan_rejections``.
    """
    if not proposal_scale > 0:
        raise ConfigError(f"proposal_scale must be positive, got {proposal_scale}")
    current = np.asarray(current, dtype=np.float64)
    theta, _, accepted = _mh_step(target, current, target.log_density(current),
                                  proposal_scale, rng, stats)
    return theta, accepted


# -- HMC -------------------------------------------------------------------------


@dataclass
class HMCConfig:
    step_size: float = 0.1
    n_steps: int = 10
    mass: str = "identity"
    adapt_every: int = 1
    adapt_until: int = 0
    clamp_lo: float = 1e-8
    clamp_hi: float = 1e8
    jitter: float = 0.0

    def __post_init__(self):
        if not self.step_size > 0:
            raise ConfigError(f"step_size must be positive, got {self.step_size}")
        if self.n_steps < 1:
            raise ConfigError(f"n_steps must be at least 1, got {self.n_steps}")
        if self.mass not in ("identity", "adaptive"):
            raise ConfigError(f"mass must be 'identity' or 'adaptive', got {self.mass!r}")
        if self.adapt_every < 1:
            raise ConfigError("adapt_every must be at least 1")
        if not 0 < self.clamp_lo < self.clamp_hi:
            raise ConfigError("clamp bounds must satisfy 0 < clamp_lo < clamp_hi")
        if not 0 <= self.jitter < 1:
            raise ConfigError("jitter must lie in [0, 1)")


@dataclass
class MassMatrixAccumulator:
    """Running average of negative Hessian diagonals, sampled every k-th iteration."""

    total: np.ndarray
    count: int = 0
    diag: np.ndarray = None
    frozen: bool = False
    disabled: bool = False

    @classmethod
    def identity(cls, dim):
        return cls(total=np.zeros(dim), count=0, diag=np.ones(dim))


def update_mass_accumulator(acc: MassMatrixAccumulator, target: TargetDensity, theta,
                            iteration, config: HMCConfig) -> MassMatrixAccumulator:
    """Fold ``-hess_diag(theta)`` into the average when ``iteration`` is a multiple of
    ``adapt_every`` and adaptation is still open (``iteration <= adapt_until``).

    The returned diagonal is the average clamped to ``[clamp_lo, clamp_hi]``.
    Targets without a Hessian diagonal leave the identity in place (with a warning).
    """
    if iteration < 1:
        raise ConfigError(f"iterations are counted from 1, got {iteration}")
    if acc.frozen or acc.disabled:
        return acc
    if iteration > config.adapt_until:
        acc.frozen = True
        return acc
    if iteration % config.adapt_every:
        return acc
    if not target.has_hess_diag:
        warnings.warn("target has no Hessian diagonal; keeping identity mass matrix",
                      RuntimeWarning, stacklevel=2)
        acc.disabled = True
        return acc
    h = -np.asarray(target.hess_diag(theta), dtype=np.float64)
    if not np.all(np.isfinite(h)):
        return acc
    acc.total = acc.total + h
    acc.count += 1
    acc.diag = np.clip(acc.total / acc.count, config.clamp_lo, config.clamp_hi)
    return acc


def _leapfrog(target, theta, p, eps, n_steps, inv_mass, grad):
    p = p + 0.5 * eps * grad
    for i in range(n_steps):
        theta = theta + eps * inv_mass * p
        grad = target.grad(theta)
        if i < n_steps - 1:
            p = p + eps * grad
        if not (np.all(np.isfinite(theta)) and np.all(np.isfinite(grad))):
            return theta, p, grad, False
    p = p + 0.5 * eps * grad
    return theta, p, grad, True


def leapfrog(target: TargetDensity, theta, p, eps, n_steps, mass_diag=None):
    """``n_steps`` velocity-Verlet steps; returns ``(theta, p)`` at the end."""
    theta = np.asarray(theta, dtype=np.float64)
    p = np.asarray(p, dtype=np.float64)
    inv_mass = 1.0 / (np.ones_like(theta) if mass_diag is None else np.asarray(mass_diag))
    theta, p, _, _ = _leapfrog(target, theta, p, eps, n_steps, inv_mass, target.grad(theta))
    return theta, p


@dataclass
class HMCResult:
    theta: np.ndarray
    accepted: bool
    energy_error: float
    divergent: bool = False
    log_density: float = None
    grad: np.ndarray = field(default=None, repr=False)


def _hmc_step(target, theta, logp, grad, config, mass_diag, rng, stats=None):
    n_steps = config.n_steps
    if config.jitter:
        n_steps = max(1, int(round(n_steps * rng.uniform(1 - config.jitter, 1 + config.jitter))))
    p0 = np.sqrt(mass_diag) * rng.standard_normal(theta.shape)
    inv_mass = 1.0 / mass_diag
    h0 = -logp + 0.5 * float(p0 @ (inv_mass * p0))
    log_u = math.log(rng.random())
    # overflow inside a runaway trajectory is caught below as a divergence
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        new, p1, g1, finite = _leapfrog(target, theta, p0, config.step_size, n_steps, inv_mass,
                                        grad)
        if finite:
            logp1 = target.log_density(new)
            h1 = -logp1 + 0.5 * float(p1 @ (inv_mass * p1))
            dh = h1 - h0
        else:
            dh = math.inf
    if not math.isfinite(dh) or dh > DIVERGENCE_THRESHOLD:
        if stats is not None:
            stats.divergences += 1
        return HMCResult(theta, False, dh, True, logp, grad)
    if log_u < -dh:
        return HMCResult(new, True, dh, False, logp1, g1)
    return HMCResult(theta, False, dh, False, logp, grad)


def hmc_step(target: TargetDensity, current, config: HMCConfig, accumulator=None, rng=None,
             stats=None):
    """One HMC transition; returns ``(state, accepted, energy_error)``.

    Momentum is drawn from ``Normal(0, M)`` with ``M`` the accumulator's
    diagonal (identity when ``accumulator`` is None or ``config.mass`` is
    ``"identity"``).  Divergent trajectories are rejected.
    """
    current = np.asarray(current, dtype=np.float64)
    mass = _mass_diag(config, accumulator, current.size)
    res = _hmc_step(target, current, target.log_density(current), target.grad(current),
                    config, mass, rng, stats)
    return res.theta, res.accepted, res.energy_error


def _mass_diag(config, acc, dim):
    if config.mass == "identity" or acc is None:
        return np.ones(dim)
    return acc.diag


def run_chain(target: TargetDensity, kernel, config, iterations, rng, warmup=0, theta0=None,
              names=None) -> ChainTrace:
    """Run ``warmup + iterations`` transitions of ``"mh"`` or ``"hmc"`` and trace the last
    ``iterations``.

    For HMC with adaptive mass, adaptation runs through the warmup (or up to
    ``config.adapt_until`` if that is smaller and positive) and then freezes.
    """
    if kernel not in ("mh", "hmc"):
        raise ConfigError(f"unknown kernel {kernel!r}; choose mh or hmc")
    if kernel == "mh" and not isinstance(config, MHConfig):
        raise ConfigError("the mh kernel needs an MHConfig")
    if kernel == "hmc" and not isinstance(config, HMCConfig):
        raise ConfigError("the hmc kernel needs an HMCConfig")
    theta = np.array(target.initial_point() if theta0 is None and hasattr(target, "initial_point")
                     else (np.zeros(target.dim) if theta0 is None else theta0), dtype=np.float64)
    names = names or (target.names() if hasattr(target, "names") else
                      [f"theta_{j + 1}" for j in range(theta.size)])
    stats = KernelStats()
    draws = np.empty((iterations, theta.size))
    seconds = np.empty(iterations)
    accepted = np.zeros(iterations, dtype=bool)
    energy = np.zeros(iterations)
    divergent = np.zeros(iterations, dtype=bool)
    logp = target.log_density(theta)

    acc = None
    if kernel == "hmc":
        grad = target.grad(theta)
        acc = MassMatrixAccumulator.identity(theta.size)
        adapt_until = warmup if config.adapt_until <= 0 else min(config.adapt_until, warmup)
        adapt_cfg = HMCConfig(**{**config.__dict__, "adapt_until": adapt_until})
    warm_accept = 0
    for it in range(warmup + iterations):
        t0 = time.perf_counter()
        if kernel == "mh":
            theta, logp, ok = _mh_step(target, theta, logp, config.proposal_scale, rng, stats)
            de, div = 0.0, False
        else:
            mass = _mass_diag(config, acc, theta.size)
            res = _hmc_step(target, theta, logp, grad, config, mass, rng, stats)
            theta, logp, grad, ok, de, div = (res.theta, res.log_density, res.grad,
                                              res.accepted, res.energy_error, res.divergent)
            if config.mass == "adaptive":
                update_mass_accumulator(acc, target, theta, it + 1, adapt_cfg)
        if it < warmup:
            warm_accept += ok
            continue
        s = it - warmup
        draws[s] = theta
        accepted[s] = ok
        energy[s] = de
        divergent[s] = div
        seconds[s] = time.perf_counter() - t0
    meta = {
        "kernel": kernel,
        "accepted": accepted,
        "energy_error": energy,
        "divergent": divergent,
        "acceptance_rate": float(accepted.mean()) if iterations else float("nan"),
        "warmup_acceptance_rate": warm_accept / warmup if warmup else float("nan"),
        "nan_rejections": stats.nan_rejections,
        "divergences": stats.divergences,
    }
    if acc is not None:
        meta["mass_diag"] = acc.diag.copy()
    return ChainTrace(names, draws, seconds, meta)
