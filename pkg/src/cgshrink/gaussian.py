"""Samplers for the structured Gaussian ``Normal(Phi^{-1} X^T Omega y, Phi^{-1})``.

Here ``Phi = X^T Omega X + tau^{-2} Lambda^{-2}`` with diagonal ``Omega`` and
``Lambda``.  Three interchangeable routes draw from it:

* :func:`sample_direct` assembles ``Phi`` and factorises it, ``O(N P^2 + P^3)``.
* :func:`sample_bhattacharya` works with an ``N x N`` system instead,
  ``O(N^2 P + N^3)``.
* :func:`sample_cg` forms a random right-hand side whose covariance is ``Phi``
  and solves ``Phi theta = b`` by prior-preconditioned CG, ``O(N P K)`` where
  ``K`` is the number of CG iterations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.linalg import blas

from .cg import DEFAULT_REL_TOL, CGReport, Preconditioner, cg_solve
from .errors import ConfigError, DimensionError, NumericalError
from .linalg import (
    DenseMatrix,
    LinearOperator,
    SparseMatrix,
    as_operator,
    cholesky,
    triangular_solve,
)


@dataclass(frozen=True, eq=False)
class StructuredGaussianTarget:
    """Ingredients of the coefficient conditional.

    ``X`` is ``N x P`` (dense or sparse); ``omega`` holds the diagonal of
    ``Omega``; the mean is ``Phi^{-1} X^T Omega y``.
    """

    X: LinearOperator
    omega: np.ndarray
    y: np.ndarray
    tau: float
    lam: np.ndarray

    def __post_init__(self):
        X = as_operator(self.X)
        omega = np.asarray(self.omega, dtype=np.float64)
        y = np.asarray(self.y, dtype=np.float64)
        lam = np.asarray(self.lam, dtype=np.float64)
        n, p = X.shape
        if omega.shape != (n,) or y.shape != (n,):
            raise DimensionError(
                f"design is {n}x{p} but omega has shape {omega.shape} and y has shape {y.shape}"
            )
        if lam.shape != (p,):
            raise DimensionError(f"design has {p} columns but lambda has shape {lam.shape}")
        if np.any(~(omega > 0)):
            raise ConfigError("all omega entries must be positive")
        if np.any(~(lam > 0)) or not self.tau > 0:
            raise ConfigError("tau and all lambda entries must be positive")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "tau", float(self.tau))

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def p(self):
        return self.X.shape[1]

    @property
    def prior_precision(self) -> np.ndarray:
        """Diagonal of ``tau^{-2} Lambda^{-2}``."""
        return 1.0 / (self.tau * self.lam) ** 2

    def weighted_response(self) -> np.ndarray:
        """``X^T Omega y``."""
        return self.X.rmatvec(self.omega * self.y)

    def precision_operator(self) -> PrecisionOperator:
        return PrecisionOperator(self)

    def dense_precision(self) -> np.ndarray:
        """Explicit ``Phi`` (full symmetric matrix)."""
        phi = _gram(self.X, self.omega)
        phi = np.tril(phi) + np.tril(phi, -1).T
        phi[np.diag_indices_from(phi)] += self.prior_precision
        return phi


class PrecisionOperator(LinearOperator):
    """``v -> X^T (Omega (X v)) + tau^{-2} Lambda^{-2} v`` without forming ``Phi``."""

    def __init__(self, target: StructuredGaussianTarget):
        self.target = target
        p = target.p
        self.shape = (p, p)
        self._prior_prec = target.prior_precision

    def _matvec(self, v):
        t = self.target
        return t.X.rmatvec(t.omega * t.X.matvec(v)) + self._prior_prec * v

    _rmatvec = _matvec

    def diagonal(self) -> np.ndarray:
        t = self.target
        if isinstance(t.X, SparseMatrix):
            sq = t.X.csr.multiply(t.X.csr)
            d = np.asarray(sq.T @ t.omega).ravel()
        elif isinstance(t.X, DenseMatrix):
            d = (t.X.array ** 2).T @ t.omega
        else:
            d = np.einsum("ij,i,ij->j", t.X.to_dense(), t.omega, t.X.to_dense())
        return d + self._prior_prec


def _gram(X, omega):
    """Lower triangle of ``X^T Omega X`` (upper triangle may be zero)."""
    if isinstance(X, SparseMatrix):
        xs = X.csr
        return np.asarray((xs.T @ sparse.diags(omega) @ xs).toarray())
    a = X.array if isinstance(X, DenseMatrix) else X.to_dense()
    xw = np.asfortranarray(a * np.sqrt(omega)[:, None])
    return blas.dsyrk(1.0, xw, trans=1, lower=1)


def _outer_gram(X, omega, d):
    """Lower triangle of ``Omega^{1/2} X D X^T Omega^{1/2}`` (``N x N``)."""
    root = np.sqrt(omega)
    if isinstance(X, SparseMatrix):
        xs = sparse.diags(root) @ X.csr @ sparse.diags(np.sqrt(d))
        return np.asarray((xs @ xs.T).toarray())
    a = X.array if isinstance(X, DenseMatrix) else X.to_dense()
    xs = np.asfortranarray(a * root[:, None] * np.sqrt(d)[None, :])
    return blas.dsyrk(1.0, xs, trans=0, lower=1)


def sample_direct(target: StructuredGaussianTarget, rng) -> np.ndarray:
    """One draw via dense ``Phi = L L^T``: ``theta = L^{-T}(L^{-1} X^T Omega y + z)``."""
    phi = _gram(target.X, target.omega)
    phi[np.diag_indices_from(phi)] += target.prior_precision
    try:
        chol = cholesky(phi, check=False)
    except NumericalError as exc:
        raise type(exc)(f"direct sampler: {exc}") from exc
    z = rng.standard_normal(target.p)
    w = triangular_solve(chol, target.weighted_response())
    return triangular_solve(chol, w + z, transposed=True)


def sample_bhattacharya(target: StructuredGaussianTarget, rng) -> np.ndarray:
    """One exact draw through an ``N x N`` solve.

    With ``D = tau^2 Lambda^2`` and ``A = Omega^{1/2} X``: draw
    ``u ~ Normal(0, D)`` and ``delta ~ Normal(0, I_N)``, set
    ``v = A u + delta``, solve ``(A D A^T + I_N) w = Omega^{1/2} y - v`` and
    return ``u + D A^T w``.
    """
    d = (target.tau * target.lam) ** 2
    root = np.sqrt(target.omega)
    u = np.sqrt(d) * rng.standard_normal(target.p)
    delta = rng.standard_normal(target.n)
    v = root * target.X.matvec(u) + delta
    m = _outer_gram(target.X, target.omega, d)
    m[np.diag_indices_from(m)] += 1.0
    try:
        chol = cholesky(m, check=False)
    except NumericalError as exc:
        raise type(exc)(f"Bhattacharya sampler: {exc}") from exc
    w = triangular_solve(chol, triangular_solve(chol, root * target.y - v), transposed=True)
    return u + d * target.X.rmatvec(root * w)


def draw_rhs(target: StructuredGaussianTarget, rng) -> np.ndarray:
    """``b = X^T Omega y + X^T Omega^{1/2} zeta + tau^{-1} Lambda^{-1} z``; ``Cov(b) = Phi``.

    ``z`` (length P) is drawn before ``zeta`` (length N).
    """
    z = rng.standard_normal(target.p)
    zeta = rng.standard_normal(target.n)
    w = target.omega * target.y + np.sqrt(target.omega) * zeta
    return target.X.rmatvec(w) + z / (target.tau * target.lam)


def make_preconditioner(name, target: StructuredGaussianTarget) -> Preconditioner:
    if isinstance(name, Preconditioner):
        return name
    if name == "prior":
        return Preconditioner.prior(target.tau, target.lam)
    if name == "jacobi":
        return Preconditioner.jacobi(target.precision_operator().diagonal())
    if name == "identity":
        return Preconditioner.identity()
    raise ConfigError(f"unknown preconditioner {name!r}; choose prior, jacobi or identity")


def sample_cg(
    target: StructuredGaussianTarget,
    rng,
    precond="prior",
    rel_tol=DEFAULT_REL_TOL,
    x0=None,
    max_iters=None,
) -> tuple[np.ndarray, CGReport]:
    """One draw by solving ``Phi theta = b`` with CG.

    ``x0`` warm-starts the solve (e.g. the previous Gibbs draw); the answer is
    tolerance-exact regardless.  Non-convergence is reported in the returned
    :class:`CGReport`, not raised.
    """
    b = draw_rhs(target, rng)
    report = cg_solve(
        target.precision_operator(),
        b,
        precond=make_preconditioner(precond, target),
        rel_tol=rel_tol,
        max_iters=max_iters,
        x0=x0,
    )
    return report.solution, report


SAMPLERS = ("direct", "bhattacharya", "cg")


def sample(target, rng, method="cg", **kwargs):
    """Dispatch on sampler name; always returns ``(theta, report_or_None)``."""
    if method == "direct":
        return sample_direct(target, rng), None
    if method == "bhattacharya":
        return sample_bhattacharya(target, rng), None
    if method == "cg":
        return sample_cg(target, rng, **kwargs)
    raise ConfigError(f"unknown sampler {method!r}; choose one of {', '.join(SAMPLERS)}")
