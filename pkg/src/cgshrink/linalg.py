"""Dense and sparse matrix types, core kernels and the linear-operator interface.

Every sampler in the package talks to matrices through :class:`LinearOperator`,
which only promises ``v -> A v`` (and, for rectangular design matrices,
``w -> A^T w``).  Dense matrices are stored column-major so that ``X^T w`` walks
contiguous memory; sparse matrices use compressed rows so that ``X v`` does.
"""

from __future__ import annotations

import csv
from contextlib import nullcontext
from pathlib import Path

import numpy as np
from scipy import sparse
from scipy.linalg import lapack
from threadpoolctl import threadpool_limits

from .errors import DimensionError, FormatError, NotPositiveDefiniteError, SingularMatrixError

SYMMETRY_RTOL = 1e-12


def _as_vector(v, name="v"):
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1:
        raise DimensionError(f"{name} must be one-dimensional, got shape {v.shape}")
    return v


def _single_thread(deterministic):
    # One BLAS thread gives a fixed reduction order.
    return threadpool_limits(1) if deterministic else nullcontext()


class LinearOperator:
    """Abstract ``v -> A v`` map.  Subclasses set ``shape`` and implement ``_matvec``."""

    shape: tuple[int, int]

    @property
    def dim(self) -> int:
        return self.shape[1]

    def matvec(self, v, deterministic=False):
        v = _as_vector(v)
        if v.shape[0] != self.shape[1]:
            raise DimensionError(
                f"{type(self).__name__} of shape {self.shape[0]}x{self.shape[1]} "
                f"cannot multiply a vector of length {v.shape[0]}"
            )
        with _single_thread(deterministic):
            return self._matvec(v)

    def rmatvec(self, w, deterministic=False):
        w = _as_vector(w, "w")
        if w.shape[0] != self.shape[0]:
            raise DimensionError(
                f"transpose of {type(self).__name__} of shape {self.shape[0]}x{self.shape[1]} "
                f"cannot multiply a vector of length {w.shape[0]}"
            )
        with _single_thread(deterministic):
            return self._rmatvec(w)

    def _matvec(self, v):
        raise NotImplementedError

    def _rmatvec(self, w):
        raise NotImplementedError(f"{type(self).__name__} does not support transpose products")

    def __matmul__(self, v):
        return self.matvec(v)

    def to_dense(self) -> np.ndarray:
        """Materialise the operator column by column (for tests and small problems)."""
        n, p = self.shape
        out = np.empty((n, p), order="F")
        e = np.zeros(p)
        for j in range(p):
            e[j] = 1.0
            out[:, j] = self.matvec(e)
            e[j] = 0.0
        return out


class DenseMatrix(LinearOperator):
    """Dense real matrix held in column-major (Fortran) order."""

    def __init__(self, entries):
        a = np.asarray(entries, dtype=np.float64)
        if a.ndim == 1:
            a = a[:, None]
        if a.ndim != 2:
            raise DimensionError(f"dense matrix entries must be 2-D, got {a.ndim}-D")
        if not np.all(np.isfinite(a)):
            bad = np.argwhere(~np.isfinite(a))[0]
            raise FormatError(f"non-finite matrix entry at row {bad[0]}, column {bad[1]}")
        self._a = np.asfortranarray(a)
        self._a.setflags(write=False)
        self.shape = self._a.shape

    @property
    def rows(self):
        return self.shape[0]

    @property
    def cols(self):
        return self.shape[1]

    @property
    def array(self) -> np.ndarray:
        """Read-only view of the underlying column-major array."""
        return self._a

    def _matvec(self, v):
        return self._a @ v

    def _rmatvec(self, w):
        return self._a.T @ w

    def to_dense(self):
        return np.array(self._a, order="F")

    def column_scaled(self, scale) -> DenseMatrix:
        return DenseMatrix(self._a * scale)

    def row_scaled(self, scale) -> DenseMatrix:
        return DenseMatrix(self._a * np.asarray(scale)[:, None])

    def __repr__(self):
        return f"DenseMatrix({self.rows}x{self.cols})"


class SparseMatrix(LinearOperator):
    """Compressed-sparse-row matrix with validated structure.

    Column indices must be strictly increasing within each row and stored
    values must be finite and nonzero.
    """

    def __init__(self, shape, indptr, indices, data):
        n, p = (int(shape[0]), int(shape[1]))
        indptr = np.asarray(indptr, dtype=np.int64)
        indices = np.asarray(indices, dtype=np.int64)
        data = np.asarray(data, dtype=np.float64)
        if indptr.shape != (n + 1,) or indptr[0] != 0:
            raise FormatError(f"row offsets must have length {n + 1} and start at 0")
        if np.any(np.diff(indptr) < 0):
            raise FormatError("row offsets must be non-decreasing")
        if indptr[-1] != indices.size or indices.size != data.size:
            raise FormatError(
                f"row offsets end at {indptr[-1]} but {indices.size} indices and "
                f"{data.size} values were given"
            )
        if indices.size and (indices.min() < 0 or indices.max() >= p):
            raise FormatError(f"column index out of range for {p} columns")
        if indices.size > 1:
            within_row = np.ones(indices.size - 1, dtype=bool)
            starts = indptr[1:-1]
            within_row[starts[(starts > 0) & (starts < indices.size)] - 1] = False
            bad = np.flatnonzero(within_row & (np.diff(indices) <= 0))
            if bad.size:
                row = int(np.searchsorted(indptr, bad[0], side="right") - 1)
                raise FormatError(f"column indices in row {row} are not strictly increasing")
        if not np.all(np.isfinite(data)):
            raise FormatError("sparse matrix values must be finite")
        if np.any(data == 0.0):
            k = int(np.flatnonzero(data == 0.0)[0])
            row = int(np.searchsorted(indptr, k, side="right") - 1)
            raise FormatError(f"explicit zero stored at row {row}, column {indices[k]}")
        self.shape = (n, p)
        self._csr = sparse.csr_matrix((data, indices, indptr), shape=(n, p))
        self._csc = None

    @classmethod
    def from_dense(cls, a):
        a = np.asarray(a, dtype=np.float64)
        csr = sparse.csr_matrix(a)
        csr.eliminate_zeros()
        csr.sort_indices()
        return cls(a.shape, csr.indptr, csr.indices, csr.data)

    @classmethod
    def from_scipy(cls, m):
        csr = sparse.csr_matrix(m, dtype=np.float64)
        csr.sum_duplicates()
        csr.eliminate_zeros()
        csr.sort_indices()
        return cls(csr.shape, csr.indptr, csr.indices, csr.data)

    @property
    def rows(self):
        return self.shape[0]

    @property
    def cols(self):
        return self.shape[1]

    @property
    def indptr(self):
        return self._csr.indptr

    @property
    def indices(self):
        return self._csr.indices

    @property
    def data(self):
        return self._csr.data

    @property
    def nnz(self):
        return self._csr.nnz

    @property
    def csr(self) -> sparse.csr_matrix:
        return self._csr

    def _matvec(self, v):
        return self._csr @ v

    def _rmatvec(self, w):
        if self._csc is None:
            self._csc = self._csr.tocsc()
        return self._csc.T @ w

    def to_dense(self):
        return np.asfortranarray(self._csr.toarray())

    def column_scaled(self, scale) -> SparseMatrix:
        return SparseMatrix.from_scipy(self._csr @ sparse.diags(np.asarray(scale, dtype=float)))

    def row_scaled(self, scale) -> SparseMatrix:
        return SparseMatrix.from_scipy(sparse.diags(np.asarray(scale, dtype=float)) @ self._csr)

    def __repr__(self):
        return f"SparseMatrix({self.rows}x{self.cols}, nnz={self.nnz})"


class DiagonalOperator(LinearOperator):
    def __init__(self, diag):
        self.diag = _as_vector(diag, "diag").copy()
        self.diag.setflags(write=False)
        self.shape = (self.diag.size, self.diag.size)

    def _matvec(self, v):
        return self.diag * v

    _rmatvec = _matvec


def as_operator(a) -> LinearOperator:
    """Wrap arrays and scipy sparse matrices; pass operators through."""
    if isinstance(a, LinearOperator):
        return a
    if sparse.issparse(a):
        return SparseMatrix.from_scipy(a)
    return DenseMatrix(a)


def matvec(a, v, deterministic=False) -> np.ndarray:
    return as_operator(a).matvec(v, deterministic=deterministic)


def _dense_array(a) -> np.ndarray:
    if isinstance(a, LinearOperator):
        return np.asarray(a.to_dense())
    return np.asarray(a, dtype=np.float64)


def check_symmetric(a, rtol=SYMMETRY_RTOL):
    a = _dense_array(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {a.shape}")
    scale = max(np.max(np.abs(a)), np.finfo(float).tiny)
    asym = np.max(np.abs(a - a.T)) / scale
    if asym > rtol:
        raise NotPositiveDefiniteError(
            f"matrix is not symmetric: relative asymmetry {asym:.3e} exceeds {rtol:.0e}"
        )
    return a


def cholesky(a, check=True) -> np.ndarray:
    """Lower-triangular ``L`` with ``L L^T = A``.

    Raises :class:`NotPositiveDefiniteError` naming the first non-positive
    pivot (0-based).
    """
    a = check_symmetric(a) if check else _dense_array(a)
    if not np.all(np.isfinite(a)):
        raise NotPositiveDefiniteError("matrix has non-finite entries")
    c, info = lapack.dpotrf(np.asfortranarray(a), lower=1, clean=1, overwrite_a=0)
    if info > 0:
        raise NotPositiveDefiniteError(
            f"matrix is not positive definite: pivot {info - 1} is non-positive",
            pivot=info - 1,
        )
    if info < 0:
        raise ValueError(f"dpotrf: illegal argument {-info}")
    return c


def triangular_solve(l, b, transposed=False) -> np.ndarray:
    """Solve ``L x = b`` (or ``L^T x = b``) for lower-triangular ``L``.

    ``b`` may be a vector or a matrix of right-hand sides.
    """
    l = _dense_array(l)
    b = np.asarray(b, dtype=np.float64)
    if l.ndim != 2 or l.shape[0] != l.shape[1]:
        raise DimensionError(f"triangular factor must be square, got shape {l.shape}")
    if b.shape[0] != l.shape[0]:
        raise DimensionError(
            f"triangular factor is {l.shape[0]}x{l.shape[1]} but right-hand side has "
            f"length {b.shape[0]}"
        )
    zero = np.flatnonzero(np.diag(l) == 0.0)
    if zero.size:
        raise SingularMatrixError(f"triangular factor is singular: zero diagonal at {zero[0]}")
    x, info = lapack.dtrtrs(l, b, lower=1, trans=1 if transposed else 0)
    if info != 0:
        raise SingularMatrixError(f"dtrtrs failed with info={info}")
    return x


def cho_solve(l, b) -> np.ndarray:
    """Solve ``A x = b`` given the Cholesky factor of ``A``."""
    return triangular_solve(l, triangular_solve(l, b), transposed=True)


def spd_solve(a, b) -> np.ndarray:
    return cho_solve(cholesky(a), b)


# -- file formats -------------------------------------------------------------


def read_dense_csv(path) -> DenseMatrix:
    """Read a headerless numeric CSV into a :class:`DenseMatrix`."""
    path = Path(path)
    rows = []
    with path.open(newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                rows.append([float(c) for c in row])
            except ValueError:
                col = next(j for j, c in enumerate(row, start=1) if not _is_float(c))
                raise FormatError(
                    f"{path}: line {lineno}, column {col}: non-numeric value {row[col - 1]!r}"
                ) from None
            if len(rows[-1]) != len(rows[0]):
                raise FormatError(
                    f"{path}: line {lineno}: expected {len(rows[0])} fields, found {len(rows[-1])}"
                )
    if not rows:
        raise FormatError(f"{path}: no data rows")
    return DenseMatrix(np.array(rows))


def write_dense_csv(path, a):
    a = _dense_array(a)
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for row in a:
            w.writerow([repr(float(x)) for x in row])


def _is_float(s):
    try:
        float(s)
    except ValueError:
        return False
    return True


MM_HEADER = "%%MatrixMarket matrix coordinate real general"


def read_matrix_market(path) -> SparseMatrix:
    """Read a 1-indexed MatrixMarket coordinate real general file."""
    path = Path(path)
    with path.open() as fh:
        lines = fh.read().splitlines()
    if not lines or " ".join(lines[0].lower().split()) != MM_HEADER.lower():
        raise FormatError(f"{path}: line 1: expected header {MM_HEADER!r}")
    it = iter(enumerate(lines[1:], start=2))
    for lineno, line in it:
        if line.strip() and not line.lstrip().startswith("%"):
            break
    else:
        raise FormatError(f"{path}: missing size line")
    try:
        n, p, nnz = (int(t) for t in line.split())
    except ValueError:
        raise FormatError(f"{path}: line {lineno}: size line must be 'rows cols nnz'") from None
    ri, ci, vals = [], [], []
    for lineno, line in it:
        if not line.strip() or line.lstrip().startswith("%"):
            continue
        parts = line.split()
        if len(parts) != 3:
            raise FormatError(f"{path}: line {lineno}: expected 'row col value'")
        try:
            i, j, x = int(parts[0]), int(parts[1]), float(parts[2])
        except ValueError:
            raise FormatError(f"{path}: line {lineno}: non-numeric entry {line.strip()!r}") from None
        if not (1 <= i <= n and 1 <= j <= p):
            raise FormatError(f"{path}: line {lineno}: index ({i}, {j}) outside {n}x{p}")
        if x == 0.0:
            raise FormatError(f"{path}: line {lineno}: explicit zero entry at ({i}, {j})")
        if not np.isfinite(x):
            raise FormatError(f"{path}: line {lineno}: non-finite entry")
        ri.append(i - 1)
        ci.append(j - 1)
        vals.append(x)
    if len(vals) != nnz:
        raise FormatError(f"{path}: header declares {nnz} entries, found {len(vals)}")
    coo = sparse.coo_matrix((vals, (ri, ci)), shape=(n, p))
    csr = coo.tocsr()
    if csr.nnz != nnz:
        raise FormatError(f"{path}: duplicate coordinates")
    csr.sort_indices()
    return SparseMatrix((n, p), csr.indptr, csr.indices, csr.data)


def write_matrix_market(path, m: SparseMatrix):
    coo = m.csr.tocoo()
    order = np.lexsort((coo.col, coo.row))
    with Path(path).open("w") as fh:
        fh.write(MM_HEADER + "\n")
        fh.write(f"{m.rows} {m.cols} {m.nnz}\n")
        for k in order:
            fh.write(f"{coo.row[k] + 1} {coo.col[k] + 1} {float(coo.data[k])!r}\n")
