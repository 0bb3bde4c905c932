"""Domain types shared by every module: masked datasets, availability
patterns, projection and kernel settings, fit results.

A :class:`MaskedDataset` keeps the covariates next to a boolean mask
(``True`` = observed).  Missing cells of ``x`` hold NaN so that an accidental
read poisons the result instead of silently contributing a number, but the
mask is the only source of truth about what was observed.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import CsvParseError, EmptyPatternError, RunIOError, ValidationError


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, order=True)
class AvailabilityPattern:
    """Sorted set of observed column indices for one row."""

    observed: tuple[int, ...]

    def __post_init__(self):
        obs = tuple(sorted({int(j) for j in self.observed}))
        if obs and obs[0] < 0:
            raise ValidationError("column indices must be non-negative", "observed")
        object.__setattr__(self, "observed", obs)

    @classmethod
    def from_mask_row(cls, row: np.ndarray) -> "AvailabilityPattern":
        return cls(tuple(np.flatnonzero(row).tolist()))

    def __len__(self) -> int:
        return len(self.observed)

    def __iter__(self) -> Iterator[int]:
        return iter(self.observed)

    def __contains__(self, j) -> bool:
        return int(j) in self.observed

    def issuperset(self, other: "AvailabilityPattern | Iterable[int]") -> bool:
        return set(self.observed) >= set(other)

    def union(self, *cols: int) -> "AvailabilityPattern":
        return AvailabilityPattern(self.observed + tuple(cols))

    def intersection(self, other: "AvailabilityPattern") -> "AvailabilityPattern":
        return AvailabilityPattern(tuple(set(self.observed) & set(other.observed)))

    def mask(self, p: int) -> np.ndarray:
        m = np.zeros(p, dtype=bool)
        m[list(self.observed)] = True
        return m

    @property
    def index(self) -> np.ndarray:
        return np.asarray(self.observed, dtype=np.intp)


@dataclass(frozen=True, eq=False)
class MaskedDataset:
    """Response, covariates and observation mask.

    Parameters
    ----------
    y : array of shape (n,)
        Response; must be fully observed and finite.
    x : array of shape (n, p)
        Covariates.  Values under ``mask == False`` are ignored (replaced by NaN).
    mask : bool array of shape (n, p)
        ``True`` where the covariate is observed.
    columns : sequence of str, optional
        Covariate names, defaults to ``x1 .. xp``.
    response : str
        Name of the response column.
    """

    y: np.ndarray
    x: np.ndarray
    mask: np.ndarray
    columns: tuple[str, ...] = ()
    response: str = "y"

    def __post_init__(self):
        y = np.array(self.y, dtype=float).reshape(-1)
        x = np.array(self.x, dtype=float)
        mask = np.array(self.mask, dtype=bool)
        if x.ndim != 2:
            raise ValidationError(f"x must be 2-D, got shape {x.shape}", "x")
        n, p = x.shape
        if y.shape != (n,):
            raise ValidationError(f"y has length {y.shape[0]}, x has {n} rows", "y")
        if mask.shape != (n, p):
            raise ValidationError(f"mask shape {mask.shape} != x shape {(n, p)}", "mask")
        if not np.all(np.isfinite(y)):
            raise ValidationError("response must be finite and fully observed", "y")
        if not np.all(np.isfinite(x[mask])):
            raise ValidationError("observed covariates must be finite", "x")
        empty = np.flatnonzero(~mask.any(axis=1))
        if empty.size:
            raise EmptyPatternError(empty.tolist())
        x = np.where(mask, x, np.nan)
        columns = tuple(self.columns) if self.columns else tuple(f"x{j + 1}" for j in range(p))
        if len(columns) != p:
            raise ValidationError(f"{len(columns)} column names for {p} columns", "columns")
        object.__setattr__(self, "y", _frozen(y))
        object.__setattr__(self, "x", _frozen(x))
        object.__setattr__(self, "mask", _frozen(mask))
        object.__setattr__(self, "columns", columns)

    @classmethod
    def complete(cls, x, y, **kw) -> "MaskedDataset":
        x = np.asarray(x, dtype=float)
        return cls(y=y, x=x, mask=np.ones(x.shape, dtype=bool), **kw)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]

    @property
    def n_missing(self) -> int:
        return int((~self.mask).sum())

    def complete_rows(self) -> np.ndarray:
        return np.flatnonzero(self.mask.all(axis=1))

    def is_complete(self) -> bool:
        return bool(self.mask.all())

    def pattern_of(self, i: int) -> AvailabilityPattern:
        return pattern_of(self, i)

    def patterns(self) -> list[AvailabilityPattern]:
        return [AvailabilityPattern.from_mask_row(r) for r in self.mask]

    def take(self, rows: Sequence[int] | np.ndarray) -> "MaskedDataset":
        rows = np.asarray(rows, dtype=np.intp)
        return MaskedDataset(
            y=self.y[rows], x=self.x[rows], mask=self.mask[rows],
            columns=self.columns, response=self.response,
        )

    def filled(self, value: float = 0.0) -> np.ndarray:
        """Copy of ``x`` with missing cells set to ``value``."""
        return np.where(self.mask, self.x, value)


def pattern_of(ds: MaskedDataset, i: int) -> AvailabilityPattern:
    """Observed column indices of row ``i``."""
    if not -ds.n <= i < ds.n:
        raise IndexError(f"row {i} out of range for n={ds.n}")
    return AvailabilityPattern.from_mask_row(ds.mask[i])


# ---------------------------------------------------------------------------
# projection / kernel settings

DIRECTION_LAWS = ("gaussian", "uniform", "sparse")


@dataclass(frozen=True)
class ProjectionSpec:
    """Number of random directions, their entry law and the seed.

    ``dist`` is ``"gaussian"`` (N(0, 1)), ``"uniform"`` (sqrt(3) * U(-1, 1),
    unit variance) or ``"sparse"``.  For the sparse law ``s`` is a number
    >= 1 or one of the per-pattern rules ``"sqrt"`` (s = sqrt|A|) and
    ``"log"`` (s = |A| / log|A|).
    """

    b: int = 100
    dist: str = "gaussian"
    s: float | str | None = None
    seed: int = 0

    def __post_init__(self):
        if int(self.b) < 1:
            raise ValidationError(f"number of directions must be >= 1, got {self.b}", "b")
        object.__setattr__(self, "b", int(self.b))
        if self.dist not in DIRECTION_LAWS:
            raise ValidationError(f"unknown direction law {self.dist!r}", "dist")
        if self.dist == "sparse":
            s = 3.0 if self.s is None else self.s
            if isinstance(s, str):
                if s not in ("sqrt", "log"):
                    raise ValidationError(f"unknown sparsity rule {s!r}", "s")
            elif not float(s) >= 1.0:
                raise ValidationError(f"sparse projection needs s >= 1, got {s}", "s")
            else:
                s = float(s)
            object.__setattr__(self, "s", s)
        object.__setattr__(self, "seed", int(self.seed) % 2**64)

    def resolve_s(self, dim: int) -> float:
        if isinstance(self.s, str):
            if self.s == "sqrt":
                return max(1.0, math.sqrt(dim))
            # |A|/log|A| >= e for |A| >= 2; a single column has no sparsity to exploit
            return dim / math.log(dim) if dim >= 2 else 1.0
        return float(self.s)


@dataclass(frozen=True)
class KernelSpec:
    """Gaussian kernel bandwidth: a fixed ``h`` or ``h = n ** exponent``."""

    h: float | None = None
    exponent: float = -1.0 / 3.0
    kernel: str = "gaussian"

    def __post_init__(self):
        if self.h is not None and not self.h > 0:
            raise ValidationError(f"bandwidth must be positive, got {self.h}", "bandwidth")
        if self.kernel != "gaussian":
            raise ValidationError(f"only the gaussian kernel is supported, got {self.kernel!r}", "kernel")

    def bandwidth(self, n: int) -> float:
        if self.h is not None:
            return float(self.h)
        return float(n) ** self.exponent


@dataclass(frozen=True, eq=False)
class ImputationDiagnostics:
    """Per-cell bookkeeping of an imputation run.

    ``donor_count`` and ``fallback_level`` are -1 on observed cells.  Fallback
    levels: 0 strict donors, 1 relaxed donors, 2 unconditional column mean.
    """

    donor_count: np.ndarray
    fallback_level: np.ndarray
    bandwidth: float
    n_patterns: int = 0

    def summary(self) -> dict:
        missing = self.fallback_level >= 0
        levels = self.fallback_level[missing]
        donors = self.donor_count[missing]
        return {
            "missing_cells": int(missing.sum()),
            "bandwidth": self.bandwidth,
            "direction_patterns": self.n_patterns,
            "fallback_counts": {str(k): int((levels == k).sum()) for k in (0, 1, 2)},
            "strict_fraction": float((levels == 0).mean()) if levels.size else 1.0,
            "donors_min": int(donors.min()) if donors.size else 0,
            "donors_median": float(np.median(donors)) if donors.size else 0.0,
            "donors_max": int(donors.max()) if donors.size else 0,
        }


@dataclass(frozen=True, eq=False)
class FitResult:
    beta: np.ndarray
    z: np.ndarray
    diagnostics: ImputationDiagnostics | None = None
    info: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# CSV I/O

def load_csv(path, response: str | None = "y", na_token: str = "NA") -> MaskedDataset:
    """Read a comma-separated file with a header row.

    The ``response`` column (default ``"y"``; ``None`` picks the first column)
    must be fully observed.  Cells equal to ``na_token`` become missing.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise RunIOError(f"cannot read {path}: {exc}") from exc
    reader = csv.reader(text.splitlines())
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise CsvParseError("empty file") from None
    if len(set(header)) != len(header):
        raise CsvParseError("duplicate column names in header", row=1)
    if response is None:
        response = header[0]
    if response not in header:
        raise CsvParseError(f"response column {response!r} not in header", row=1)
    ycol = header.index(response)
    xcols = [k for k in range(len(header)) if k != ycol]
    if not xcols:
        raise CsvParseError("no covariate columns", row=1)

    values, observed = [], []
    for lineno, rec in enumerate(reader, start=2):
        if not rec or all(not c.strip() for c in rec):
            continue
        if len(rec) != len(header):
            raise CsvParseError(f"expected {len(header)} fields, found {len(rec)}", row=lineno)
        row_v, row_m = [], []
        for k, cell in enumerate(rec):
            cell = cell.strip()
            if cell == na_token:
                if k == ycol:
                    raise CsvParseError("missing response values are not supported", lineno, header[k])
                row_v.append(np.nan)
                row_m.append(False)
                continue
            try:
                v = float(cell)
            except ValueError:
                raise CsvParseError(f"not a number: {cell!r}", lineno, header[k]) from None
            if not math.isfinite(v):
                raise CsvParseError(f"non-finite value {cell!r}", lineno, header[k])
            row_v.append(v)
            row_m.append(True)
        values.append(row_v)
        observed.append(row_m)
    if not values:
        raise CsvParseError("no data rows")
    values = np.asarray(values, dtype=float)
    observed = np.asarray(observed, dtype=bool)
    mask = observed[:, xcols]
    empty = np.flatnonzero(~mask.any(axis=1))
    if empty.size:
        raise EmptyPatternError([int(r) + 2 for r in empty])
    return MaskedDataset(
        y=values[:, ycol], x=values[:, xcols], mask=mask,
        columns=tuple(header[k] for k in xcols), response=response,
    )


def write_csv(ds: MaskedDataset, path, na_token: str = "NA") -> None:
    """Write ``ds`` with the response first; floats use round-trip repr."""
    path = Path(path)
    try:
        with path.open("w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([ds.response, *ds.columns])
            for i in range(ds.n):
                cells = [repr(float(ds.y[i]))]
                cells += [repr(float(v)) if m else na_token for v, m in zip(ds.x[i], ds.mask[i])]
                w.writerow(cells)
    except OSError as exc:
        raise RunIOError(f"cannot write {path}: {exc}") from exc


# ---------------------------------------------------------------------------
# standardization

@dataclass(frozen=True)
class Scaling:
    """Observed-cell location and scale of every column, to undo ``standardize``."""

    x_mean: np.ndarray
    x_scale: np.ndarray
    y_mean: float
    y_scale: float

    def coef_to_raw(self, beta) -> tuple[np.ndarray, float]:
        """Map coefficients fitted on standardized data to (slopes, intercept) on the raw scale."""
        beta = np.asarray(beta, dtype=float)
        slopes = beta * self.y_scale / self.x_scale
        intercept = self.y_mean - float(slopes @ self.x_mean)
        return slopes, intercept


def standardize(ds: MaskedDataset) -> tuple[MaskedDataset, Scaling]:
    """Center and scale y and every covariate using observed cells only (ddof=1)."""
    counts = ds.mask.sum(axis=0)
    for j in np.flatnonzero(counts < 2):
        raise ValidationError(f"needs at least 2 observed values, has {counts[j]}", ds.columns[j])
    x0 = ds.filled(0.0)
    mean = x0.sum(axis=0) / counts
    dev = np.where(ds.mask, ds.x - mean, 0.0)
    sd = np.sqrt((dev**2).sum(axis=0) / (counts - 1))
    for j in range(ds.p):
        if not sd[j] > 0:
            raise ValidationError("constant observed column cannot be standardized", ds.columns[j])
    y_mean = float(ds.y.mean())
    y_sd = float(ds.y.std(ddof=1)) if ds.n > 1 else 0.0
    if not y_sd > 0:
        raise ValidationError("constant response cannot be standardized", ds.response)
    out = MaskedDataset(
        y=(ds.y - y_mean) / y_sd, x=dev / sd, mask=ds.mask,
        columns=ds.columns, response=ds.response,
    )
    return out, Scaling(_frozen(mean), _frozen(sd), y_mean, y_sd)
