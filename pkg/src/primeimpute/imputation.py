"""Kernel imputation of missing covariate cells.

A missing cell ``(i, j)`` is replaced by a weighted average of ``x[i', j]``
over donor rows ``i'`` that observe every column row ``i`` observes plus
column ``j``.  Weights come either from the geometric mean of univariate
Gaussian kernels on random projections of the shared coordinates
(``method="prime"``) or from the plain multivariate Gaussian kernel on
those coordinates (``method="plain"``).

When no donor exists, the ``"relaxed"`` policy first falls back to every row
observing ``j``, comparing on the columns it shares with row ``i``, and then
to the observed mean of column ``j``.  The ``"strict"`` policy raises.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .core import (
    AvailabilityPattern,
    ImputationDiagnostics,
    KernelSpec,
    MaskedDataset,
    ProjectionSpec,
)
from .errors import UnimputableCellError, ValidationError
from .projection import (
    DirectionCache,
    log_geo_kernel_rows,
    log_plain_kernel_rows,
    normalize_log_weights,
)

STRICT, RELAXED, COLUMN_MEAN = 0, 1, 2


@dataclass(frozen=True)
class ImputeConfig:
    method: str = "prime"
    projection: ProjectionSpec = field(default_factory=ProjectionSpec)
    kernel: KernelSpec = field(default_factory=KernelSpec)
    fallback: str = "relaxed"

    def __post_init__(self):
        if self.method not in ("prime", "plain"):
            raise ValidationError(f"unknown imputation method {self.method!r}", "method")
        if self.fallback not in ("strict", "relaxed"):
            raise ValidationError(f"unknown fallback policy {self.fallback!r}", "fallback")

    def with_seed(self, seed: int | None) -> "ImputeConfig":
        if seed is None:
            return self
        return replace(self, projection=replace(self.projection, seed=seed))


@dataclass(frozen=True)
class CellDiagnostics:
    donors: int
    level: int


def donor_set(ds: MaskedDataset, i: int, j: int) -> np.ndarray:
    """Rows whose availability set contains that of row ``i`` plus column ``j``."""
    if ds.mask[i, j]:
        raise ValidationError(f"cell ({i}, {j}) is observed, nothing to impute")
    cols = np.append(np.flatnonzero(ds.mask[i]), j)
    return np.flatnonzero(ds.mask[:, cols].all(axis=1))


def _log_kernel(ds, i, cols, rows, cfg, cache, h):
    """Log kernel between row ``i`` and each of ``rows`` on columns ``cols``."""
    diff = ds.x[np.ix_(rows, cols)] - ds.x[i, cols]
    if cfg.method == "plain":
        return log_plain_kernel_rows(diff, h)
    dirs = cache.get(AvailabilityPattern(tuple(cols.tolist())))
    return log_geo_kernel_rows(dirs.project(diff), h)


def _weighted_mean(ds, j, rows, logw):
    w = normalize_log_weights(logw)
    return float(w @ ds.x[rows, j])


def _relaxed(ds, i, j, cfg, cache, h):
    """Level-1 and level-2 fallback for a cell with no strict donor."""
    rows = np.flatnonzero(ds.mask[:, j])
    if rows.size == 0:
        raise UnimputableCellError(i, j, "column has no observed value")
    obs_i = np.flatnonzero(ds.mask[i])
    shared = ds.mask[np.ix_(rows, obs_i)]
    keep = shared.any(axis=1)
    if keep.any():
        rows, shared = rows[keep], shared[keep]
        logw = np.empty(rows.size)
        keys, inverse = np.unique(shared, axis=0, return_inverse=True)
        inverse = inverse.reshape(-1)
        for g, key in enumerate(keys):
            sel = inverse == g
            logw[sel] = _log_kernel(ds, i, obs_i[key], rows[sel], cfg, cache, h)
        return _weighted_mean(ds, j, rows, logw), CellDiagnostics(int(rows.size), RELAXED)
    return float(ds.x[rows, j].mean()), CellDiagnostics(int(rows.size), COLUMN_MEAN)


def _resolve(ds, cfg, cache, h):
    if cache is None:
        cache = DirectionCache(cfg.projection)
    if h is None:
        h = cfg.kernel.bandwidth(ds.n)
    return cache, h


def impute_cell(
    ds: MaskedDataset,
    i: int,
    j: int,
    cfg: ImputeConfig,
    dirs: DirectionCache | None = None,
    h: float | None = None,
) -> tuple[float, CellDiagnostics]:
    """Impute the missing cell ``(i, j)``.

    Parameters
    ----------
    dirs : DirectionCache, optional
        Shared cache; a fresh one seeded from ``cfg.projection`` otherwise.
    h : float, optional
        Bandwidth; defaults to ``cfg.kernel`` evaluated at ``ds.n``.
    """
    cache, h = _resolve(ds, cfg, dirs, h)
    donors = donor_set(ds, i, j)
    if donors.size:
        logw = _log_kernel(ds, i, np.flatnonzero(ds.mask[i]), donors, cfg, cache, h)
        return _weighted_mean(ds, j, donors, logw), CellDiagnostics(int(donors.size), STRICT)
    if cfg.fallback == "strict":
        raise UnimputableCellError(i, j, "no donor observes this row's columns plus the target")
    return _relaxed(ds, i, j, cfg, cache, h)


def build_z(
    ds: MaskedDataset,
    cfg: ImputeConfig,
    seed: int | None = None,
    dirs: DirectionCache | None = None,
) -> tuple[np.ndarray, ImputationDiagnostics]:
    """Imputed design matrix: observed cells verbatim, missing cells imputed.

    ``seed`` overrides ``cfg.projection.seed``.  The kernel between a row and
    its candidate donors is computed once per row and reused for each of the
    row's missing columns.
    """
    cfg = cfg.with_seed(seed)
    cache, h = _resolve(ds, cfg, dirs, None)
    z = ds.x.copy()
    donors = np.full((ds.n, ds.p), -1, dtype=np.int64)
    level = np.full((ds.n, ds.p), -1, dtype=np.int8)

    for i in np.flatnonzero(~ds.mask.all(axis=1)):
        obs = np.flatnonzero(ds.mask[i])
        cand = np.flatnonzero(ds.mask[:, obs].all(axis=1))
        logk = _log_kernel(ds, i, obs, cand, cfg, cache, h)
        for j in np.flatnonzero(~ds.mask[i]):
            sel = ds.mask[cand, j]
            if sel.any():
                z[i, j] = _weighted_mean(ds, j, cand[sel], logk[sel])
                donors[i, j], level[i, j] = int(sel.sum()), STRICT
                continue
            if cfg.fallback == "strict":
                raise UnimputableCellError(int(i), int(j), "no donor observes this row's columns plus the target")
            value, diag = _relaxed(ds, i, j, cfg, cache, h)
            z[i, j] = value
            donors[i, j], level[i, j] = diag.donors, diag.level

    diagnostics = ImputationDiagnostics(donors, level, float(h), len(cache))
    return z, diagnostics
