"""Preconditioned conjugate gradient for symmetric positive definite operators."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigvalsh_tridiagonal

from .errors import ConfigError, DimensionError, NotPositiveDefiniteError
from .linalg import as_operator

DEFAULT_REL_TOL = 1e-10


def apply_prior_preconditioner(tau, lam, v):
    """Return ``tau^2 * lam^2 * v`` entrywise, the inverse of the prior precision block."""
    lam = np.asarray(lam, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if not tau > 0:
        raise ConfigError(f"global scale must be positive, got {tau}")
    if np.any(~(lam > 0)):
        raise ConfigError(f"local scales must be positive (index {int(np.argmin(lam > 0))})")
    if lam.shape != v.shape:
        raise DimensionError(f"{lam.size} local scales for a vector of length {v.size}")
    return (tau * tau) * (lam * lam) * v


class Preconditioner:
    """Symmetric positive definite ``v -> M^{-1} v``.

    Build one with :meth:`identity`, :meth:`jacobi` or :meth:`prior`.
    """

    def __init__(self, variant, inverse_diag=None, tau=None, lam=None):
        self.variant = variant
        self.inverse_diag = inverse_diag
        self.tau = tau
        self.lam = lam

    @classmethod
    def identity(cls):
        return cls("identity")

    @classmethod
    def jacobi(cls, diagonal):
        """``diagonal`` is the operator's diagonal, or an object exposing ``diagonal()``."""
        if hasattr(diagonal, "diagonal") and not isinstance(diagonal, np.ndarray):
            diagonal = diagonal.diagonal()
        d = np.asarray(diagonal, dtype=np.float64)
        if np.any(~(d > 0)):
            raise ConfigError("Jacobi preconditioner needs a strictly positive diagonal")
        return cls("jacobi", inverse_diag=1.0 / d)

    @classmethod
    def prior(cls, tau, lam):
        lam = np.asarray(lam, dtype=np.float64)
        # validates positivity
        inv = apply_prior_preconditioner(tau, lam, np.ones_like(lam))
        return cls("prior", inverse_diag=inv, tau=float(tau), lam=lam)

    def apply(self, v):
        if self.variant == "identity":
            return np.array(v, dtype=np.float64, copy=True)
        if self.inverse_diag.shape != np.shape(v):
            raise DimensionError(
                f"{self.variant} preconditioner of size {self.inverse_diag.size} applied to "
                f"vector of length {np.size(v)}"
            )
        return self.inverse_diag * v

    def __repr__(self):
        return f"Preconditioner({self.variant})"


@dataclass
class CGReport:
    solution: np.ndarray
    iterations: int
    final_relative_residual: float
    residual_history: np.ndarray
    converged: bool
    true_relative_residual: float
    rel_tol: float
    preconditioner: str = "identity"
    lanczos_diag: np.ndarray = field(default=None, repr=False)
    lanczos_offdiag: np.ndarray = field(default=None, repr=False)

    def condition_estimate(self):
        """Condition number of the preconditioned operator from the Lanczos tridiagonal.

        Uses the CG step coefficients; an underestimate of the true value that
        tightens as iterations grow.  ``nan`` when no iterations were taken.
        """
        if self.lanczos_diag is None or self.lanczos_diag.size == 0:
            return float("nan")
        ev = eigvalsh_tridiagonal(self.lanczos_diag, self.lanczos_offdiag)
        return float(ev[-1] / ev[0]) if ev[0] > 0 else float("inf")

    def to_dict(self, include_solution=True):
        out = {
            "iterations": self.iterations,
            "final_relative_residual": self.final_relative_residual,
            "true_relative_residual": self.true_relative_residual,
            "residual_history": self.residual_history.tolist(),
            "converged": self.converged,
            "rel_tol": self.rel_tol,
            "preconditioner": self.preconditioner,
        }
        if include_solution:
            out["solution"] = self.solution.tolist()
        return out

    def to_json(self, include_solution=True):
        return json.dumps(self.to_dict(include_solution), sort_keys=True)


def cg_solve(a, b, precond=None, rel_tol=DEFAULT_REL_TOL, max_iters=None, x0=None):
    """Solve ``A x = b`` for SPD ``A`` by preconditioned conjugate gradient.

    Convergence is declared when the preconditioned residual norm
    ``sqrt(r^T M^{-1} r)`` falls to ``rel_tol`` times ``sqrt(b^T M^{-1} b)``.
    ``max_iters`` defaults to the dimension.  On non-convergence the last
    iterate is returned with ``converged=False``.

    Raises
    ------
    NotPositiveDefiniteError
        If a search direction has non-positive curvature ``p^T A p``.
    """
    a = as_operator(a)
    b = np.asarray(b, dtype=np.float64)
    p_dim = a.shape[1]
    if a.shape[0] != p_dim:
        raise DimensionError(f"CG needs a square operator, got {a.shape}")
    if b.shape != (p_dim,):
        raise DimensionError(f"operator is {p_dim}x{p_dim} but right-hand side has shape {b.shape}")
    if not rel_tol > 0:
        raise ConfigError(f"rel_tol must be positive, got {rel_tol}")
    if max_iters is None:
        max_iters = p_dim
    if max_iters < 1:
        raise ConfigError(f"max_iters must be at least 1, got {max_iters}")
    precond = precond or Preconditioner.identity()
    name = precond.variant

    b_norm = np.linalg.norm(b)
    if b_norm == 0.0:
        return CGReport(np.zeros(p_dim), 0, 0.0, np.zeros(0), True, 0.0, rel_tol, name,
                        np.zeros(0), np.zeros(0))

    if x0 is None:
        x = np.zeros(p_dim)
        r = b.copy()
    else:
        x = np.array(x0, dtype=np.float64, copy=True)
        if x.shape != b.shape:
            raise DimensionError(f"initial guess has shape {x.shape}, expected {b.shape}")
        r = b - a.matvec(x)
    z = precond.apply(r)
    rz = r @ z
    ref = np.sqrt(b @ precond.apply(b))
    relres = np.sqrt(max(rz, 0.0)) / ref

    history = []
    alphas, betas = [], []
    converged = relres <= rel_tol
    d = z.copy()
    k = 0
    while not converged and k < max_iters:
        k += 1
        ad = a.matvec(d)
        curvature = d @ ad
        if not curvature > 0:
            raise NotPositiveDefiniteError(
                f"operator not positive definite: non-positive curvature {curvature:.3e} "
                f"at CG iteration {k}",
                iteration=k,
            )
        alpha = rz / curvature
        x += alpha * d
        r -= alpha * ad
        z = precond.apply(r)
        rz_new = r @ z
        relres = np.sqrt(max(rz_new, 0.0)) / ref
        history.append(relres)
        alphas.append(alpha)
        beta = rz_new / rz
        betas.append(beta)
        if relres <= rel_tol:
            converged = True
            break
        d = z + beta * d
        rz = rz_new

    alphas = np.array(alphas)
    betas = np.array(betas)
    if alphas.size:
        ldiag = 1.0 / alphas
        ldiag[1:] += betas[:-1] / alphas[:-1]
        loff = np.sqrt(np.abs(betas[:-1])) / alphas[:-1]
    else:
        ldiag = loff = np.zeros(0)

    return CGReport(
        solution=x,
        iterations=k,
        final_relative_residual=float(relres),
        residual_history=np.array(history),
        converged=bool(converged),
        true_relative_residual=float(np.linalg.norm(r) / b_norm),
        rel_tol=rel_tol,
        preconditioner=name,
        lanczos_diag=ldiag,
        lanczos_offdiag=loff,
    )
