"""Chain traces, effective sample size and ESS per second."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .errors import ConfigError, FormatError

ESS_SLACK = 0.05


@dataclass
class ChainTrace:
    """Post-warmup draws, one row per sweep, plus timing and kernel metadata.

    ``sweep_seconds`` holds per-sweep wall-clock; ``meta`` carries per-sweep
    arrays such as ``accepted``, ``energy_error``, ``cg_iterations`` and
    ``divergent`` along with scalar counters.
    """

    names: list[str]
    draws: np.ndarray
    sweep_seconds: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.draws = np.asarray(self.draws, dtype=np.float64).reshape(-1, len(self.names))
        self.sweep_seconds = np.asarray(self.sweep_seconds, dtype=np.float64)
        if self.sweep_seconds.shape != (self.draws.shape[0],):
            raise ConfigError(
                f"{self.draws.shape[0]} draws but {self.sweep_seconds.size} sweep timings"
            )

    @property
    def n_draws(self):
        return self.draws.shape[0]

    @property
    def total_seconds(self):
        return float(self.sweep_seconds.sum())

    def __len__(self):
        return self.n_draws

    def __getitem__(self, name):
        try:
            return self.draws[:, self.names.index(name)]
        except ValueError:
            raise KeyError(f"no parameter {name!r}; available: {', '.join(self.names)}") from None

    def select(self, prefix):
        """Columns whose names start with ``prefix`` as an ``(S, k)`` array."""
        idx = [i for i, n in enumerate(self.names) if n.startswith(prefix)]
        return self.draws[:, idx]

    def to_csv(self, path):
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.names)
            for row in self.draws:
                w.writerow([repr(float(x)) for x in row])

    def timings_to_csv(self, path):
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            cols = ["sweep_seconds"] + [k for k in ("cg_iterations", "accepted", "energy_error")
                                        if k in self.meta]
            w.writerow(cols)
            arrays = [self.sweep_seconds] + [np.asarray(self.meta[k]) for k in cols[1:]]
            for row in zip(*arrays):
                w.writerow([repr(float(x)) for x in row])

    @classmethod
    def from_csv(cls, path, timings=None):
        path = Path(path)
        with path.open(newline="") as fh:
            reader = csv.reader(fh)
            try:
                names = next(reader)
            except StopIteration:
                raise FormatError(f"{path}: empty trace file") from None
            rows = []
            for lineno, row in enumerate(reader, start=2):
                if not row:
                    continue
                try:
                    rows.append([float(x) for x in row])
                except ValueError:
                    raise FormatError(f"{path}: line {lineno}: non-numeric value") from None
                if len(row) != len(names):
                    raise FormatError(
                        f"{path}: line {lineno}: expected {len(names)} fields, found {len(row)}"
                    )
        draws = np.array(rows).reshape(-1, len(names))
        seconds = np.full(draws.shape[0], np.nan)
        if timings is not None:
            with Path(timings).open(newline="") as fh:
                reader = csv.DictReader(fh)
                seconds = np.array([float(r["sweep_seconds"]) for r in reader])
        return cls(names, draws, seconds)


class EssEstimate(NamedTuple):
    ess: float
    degenerate: bool
    superefficient: bool


def autocorrelation(x) -> np.ndarray:
    """Normalised autocorrelation at all lags (biased autocovariance, via FFT)."""
    x = np.asarray(x, dtype=np.float64)
    n = x.size
    xc = x - x.mean()
    size = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(xc, size)
    acov = np.fft.irfft(f * np.conj(f), size)[:n] / n
    if acov[0] == 0.0:
        return np.zeros(n)
    return acov / acov[0]


def ess_estimate(x) -> EssEstimate:
    """ESS with Geyer's initial-positive-sequence truncation, plus flags.

    ``ESS = S / (1 + 2 sum_t rho_t)``, where the autocorrelation sum runs over
    consecutive lag pairs ``rho_{2k} + rho_{2k+1}`` while those stay positive.
    A constant chain reports ESS 1 (``degenerate``).  Antithetic chains can
    exceed ``S``; they are capped at ``S log10 S`` and flagged.
    """
    x = np.asarray(x, dtype=np.float64)
    s = x.size
    if s < 10:
        raise ConfigError(f"ESS needs at least 10 draws, got {s}")
    if np.ptp(x) == 0.0:
        return EssEstimate(1.0, True, False)
    rho = autocorrelation(x)
    m = s // 2
    pairs = rho[: 2 * m].reshape(m, 2).sum(axis=1)
    nonpos = np.flatnonzero(pairs <= 0.0)
    k = nonpos[0] if nonpos.size else m
    tau = -1.0 + 2.0 * pairs[:k].sum()
    cap = s * np.log10(s)
    if tau <= 0 or s / tau > cap:
        return EssEstimate(float(cap), False, True)
    ess = s / tau
    return EssEstimate(float(ess), False, bool(ess > s))


def effective_sample_size(x) -> float:
    return ess_estimate(x).ess


@dataclass
class EssReport:
    names: list[str]
    ess: np.ndarray
    n_draws: int
    total_seconds: float
    min_ess: float
    median_ess: float
    min_ess_per_second: float
    median_ess_per_second: float
    degenerate: list[str] = field(default_factory=list)
    superefficient: list[str] = field(default_factory=list)

    def to_dict(self):
        return {
            "n_draws": self.n_draws,
            "total_seconds": self.total_seconds,
            "min_ess": self.min_ess,
            "median_ess": self.median_ess,
            "min_ess_per_second": self.min_ess_per_second,
            "median_ess_per_second": self.median_ess_per_second,
            "ess": dict(zip(self.names, map(float, self.ess))),
            "degenerate": self.degenerate,
            "superefficient": self.superefficient,
        }

    def to_json(self, path=None):
        text = json.dumps(self.to_dict(), sort_keys=True, indent=2)
        if path is not None:
            Path(path).write_text(text + "\n", encoding="utf-8")
        return text

    def to_csv(self, path):
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["parameter", "ess", "ess_per_second"])
            for n, e in zip(self.names, self.ess):
                w.writerow([n, repr(float(e)), repr(float(e / self.total_seconds))])


def ess_per_second(ess, seconds):
    """``(min ESS/s, median ESS/s)`` for per-parameter ESS over ``seconds`` of sampling."""
    ess = np.atleast_1d(np.asarray(ess, dtype=np.float64))
    if not seconds > 0:
        raise ConfigError(f"sampling time must be positive, got {seconds}")
    return float(ess.min() / seconds), float(np.median(ess) / seconds)


def ess_report(traces, names=None, seconds=None) -> EssReport:
    """ESS summary for one trace or several chains of the same kernel.

    Multiple chains are concatenated per parameter and their timings summed.
    Reported ESS is capped at ``S (1 + 0.05)``.
    """
    if isinstance(traces, ChainTrace):
        traces = [traces]
    names = list(names or traces[0].names)
    total = float(sum(t.total_seconds for t in traces)) if seconds is None else float(seconds)
    s = sum(t.n_draws for t in traces)
    values, degenerate, superefficient = [], [], []
    for name in names:
        est = ess_estimate(np.concatenate([t[name] for t in traces]))
        ess = est.ess
        if est.degenerate:
            degenerate.append(name)
        if est.superefficient or ess > s * (1 + ESS_SLACK):
            superefficient.append(name)
            ess = min(ess, s * (1 + ESS_SLACK))
        values.append(ess)
    values = np.array(values)
    if np.isfinite(total) and total > 0:
        min_s, med_s = ess_per_second(values, total)
    else:
        min_s = med_s = float("nan")
    return EssReport(
        names=names,
        ess=values,
        n_draws=s,
        total_seconds=total,
        min_ess=float(values.min()),
        median_ess=float(np.median(values)),
        min_ess_per_second=min_s,
        median_ess_per_second=med_s,
        degenerate=degenerate,
        superefficient=superefficient,
    )
