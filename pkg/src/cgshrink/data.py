"""Regression datasets and their on-disk formats."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, DimensionError, FormatError
from .linalg import DenseMatrix, LinearOperator, SparseMatrix, as_operator, read_matrix_market

FAMILIES = ("gaussian", "binomial")


@dataclass(eq=False)
class Dataset:
    X: LinearOperator
    y: np.ndarray
    family: str = "gaussian"
    names: list[str] = field(default=None)

    def __post_init__(self):
        self.X = as_operator(self.X)
        self.y = np.asarray(self.y, dtype=np.float64).ravel()
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown family {self.family!r}; choose gaussian or binomial")
        if self.y.shape[0] != self.X.shape[0]:
            raise DimensionError(
                f"design has {self.X.shape[0]} rows but response has {self.y.shape[0]} entries"
            )
        if not np.all(np.isfinite(self.y)):
            raise FormatError("response contains non-finite values")
        if self.family == "binomial" and not np.all((self.y == 0) | (self.y == 1)):
            bad = np.flatnonzero((self.y != 0) & (self.y != 1))[0]
            raise FormatError(
                f"binomial response must be 0/1; row {bad} has value {self.y[bad]!r}"
            )
        if self.names is None:
            self.names = [f"x{j + 1}" for j in range(self.p)]
        elif len(self.names) != self.p:
            raise DimensionError(f"{len(self.names)} column names for {self.p} columns")

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def p(self):
        return self.X.shape[1]

    @property
    def is_sparse(self):
        return isinstance(self.X, SparseMatrix)


def _read_numeric_csv(path, header=True):
    path = Path(path)
    if not path.exists():
        raise FormatError(f"{path}: file not found")
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        names = None
        if header:
            try:
                names = [h.strip() for h in next(reader)]
            except StopIteration:
                raise FormatError(f"{path}: empty file") from None
        rows = []
        first = 2 if header else 1
        for lineno, row in enumerate(reader, start=first):
            if not row or all(not c.strip() for c in row):
                continue
            width = len(names) if names is not None else len(rows[0]) if rows else len(row)
            if len(row) != width:
                raise FormatError(f"{path}: line {lineno}: expected {width} fields, found {len(row)}")
            vals = []
            for col, cell in enumerate(row, start=1):
                try:
                    vals.append(float(cell))
                except ValueError:
                    label = f" ({names[col - 1]!r})" if names else ""
                    raise FormatError(
                        f"{path}: line {lineno}, column {col}{label}: non-numeric value {cell!r}"
                    ) from None
            rows.append(vals)
    if not rows:
        raise FormatError(f"{path}: no data rows")
    return names, np.array(rows)


def parse_dataset(path, fmt="csv", response=None, family="gaussian", response_path=None) -> Dataset:
    """Load a dataset.

    ``fmt="csv"``: a headered CSV holding predictors and the ``response`` column.
    ``fmt="mtx"``: a MatrixMarket design at ``path`` with the response in a
    separate CSV at ``response_path`` (single column, optional header; with a
    header, ``response`` selects the column).
    """
    if fmt == "csv":
        names, table = _read_numeric_csv(path, header=True)
        if response is None:
            raise ConfigError("a response column name is required for CSV datasets")
        if response not in names:
            raise ConfigError(
                f"{path}: response column {response!r} not found; available columns: "
                + ", ".join(names)
            )
        j = names.index(response)
        keep = [i for i in range(len(names)) if i != j]
        return Dataset(DenseMatrix(table[:, keep]), table[:, j], family, [names[i] for i in keep])
    if fmt == "mtx":
        X = read_matrix_market(path)
        if response_path is None:
            raise ConfigError("MatrixMarket datasets need a separate response CSV")
        y = _read_response(response_path, response)
        return Dataset(X, y, family)
    raise ConfigError(f"unknown dataset format {fmt!r}; choose csv or mtx")


def _read_response(path, column=None):
    path = Path(path)
    with path.open(newline="") as fh:
        first = next(csv.reader(fh), None)
    if first is None:
        raise FormatError(f"{path}: empty file")
    try:
        [float(c) for c in first]
        has_header = False
    except ValueError:
        has_header = True
    names, table = _read_numeric_csv(path, header=has_header)
    if names is None:
        if table.shape[1] != 1:
            raise FormatError(f"{path}: response file without header must have one column")
        return table[:, 0]
    if column is None:
        if len(names) != 1:
            raise ConfigError(f"{path}: choose a response column from: {', '.join(names)}")
        return table[:, 0]
    if column not in names:
        raise ConfigError(
            f"{path}: response column {column!r} not found; available columns: {', '.join(names)}"
        )
    return table[:, names.index(column)]


def write_dataset_csv(path, dataset: Dataset, response="y"):
    X = dataset.X.to_dense()
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(dataset.names) + [response])
        for row, yi in zip(X, dataset.y):
            w.writerow([repr(float(v)) for v in row] + [repr(float(yi))])


def synthetic_linear(n, p, k, magnitude=3.0, noise=1.0, seed=0, sparse_density=None):
    """Gaussian-design linear data with ``k`` signals of size ``magnitude`` (first ``k`` columns)."""
    rng = np.random.default_rng(seed)
    if sparse_density is None:
        X = DenseMatrix(rng.standard_normal((n, p)))
    else:
        from scipy import sparse

        m = sparse.random(n, p, density=sparse_density, random_state=rng,
                          data_rvs=rng.standard_normal, format="csr")
        X = SparseMatrix.from_scipy(m)
    theta = np.zeros(p)
    theta[:k] = magnitude * rng.choice([-1.0, 1.0], size=k)
    y = X.matvec(theta) + noise * rng.standard_normal(n)
    return Dataset(X, y, "gaussian"), theta


def synthetic_logistic(n, p, k, magnitude=2.0, seed=0):
    rng = np.random.default_rng(seed)
    X = DenseMatrix(rng.standard_normal((n, p)))
    theta = np.zeros(p)
    theta[:k] = magnitude * rng.choice([-1.0, 1.0], size=k)
    prob = 1.0 / (1.0 + np.exp(-X.matvec(theta)))
    y = (rng.random(n) < prob).astype(float)
    return Dataset(X, y, "binomial"), theta
