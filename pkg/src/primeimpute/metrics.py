"""Accuracy metrics aggregated over simulation replications.

All functions take the estimates of one method as an ``N x p`` array (one
row per replication) or as a list of :class:`ReplicationRecord`.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from scipy.stats import rankdata

from .errors import ValidationError


@dataclass(frozen=True, eq=False)
class ReplicationRecord:
    method: str
    replication: int
    beta_hat: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.beta_hat, dtype=float).reshape(-1)
        if not np.all(np.isfinite(b)):
            raise ValidationError(f"non-finite estimate in replication {self.replication}", self.method)
        object.__setattr__(self, "beta_hat", b)


def as_matrix(records) -> tuple[np.ndarray, np.ndarray]:
    """(replication ids, N x p estimates) sorted by replication id."""
    if isinstance(records, np.ndarray) or (
        isinstance(records, Sequence) and records and not isinstance(records[0], ReplicationRecord)
    ):
        betas = np.atleast_2d(np.asarray(records, dtype=float))
        return np.arange(betas.shape[0]), betas
    recs = sorted(records, key=lambda r: r.replication)
    if not recs:
        raise ValidationError("no replication records")
    ids = np.array([r.replication for r in recs])
    if np.unique(ids).size != ids.size:
        raise ValidationError("duplicate replication index")
    return ids, np.vstack([r.beta_hat for r in recs])


def _betas(records) -> np.ndarray:
    return as_matrix(records)[1]


def nad(records, beta0) -> np.ndarray:
    """Mean normalized absolute deviation per coefficient.

    ``NAD_j = mean_i |b_ij - beta0_j| / |beta0_j|``; zero true coefficients
    are not scored and come back as NaN.
    """
    betas = _betas(records)
    beta0 = np.asarray(beta0, dtype=float)
    scored = beta0 != 0
    if not scored.any():
        raise ValidationError("every true coefficient is zero; NAD is undefined", "beta0")
    out = np.full(beta0.shape, np.nan)
    out[scored] = (np.abs(betas[:, scored] - beta0[scored]) / np.abs(beta0[scored])).mean(axis=0)
    return out


def replication_mse(records, beta0) -> np.ndarray:
    """``(1/p) sum_j (b_ij - beta0_j)^2`` for each replication i."""
    betas = _betas(records)
    return ((betas - np.asarray(beta0, dtype=float)) ** 2).mean(axis=1)


def mse_decomposed(records, beta0) -> tuple[float, float, float]:
    """(MSE, variance, squared bias), averaged over coefficients.

    Variance uses the 1/N convention, so MSE = variance + bias^2 exactly.
    """
    betas = _betas(records)
    beta0 = np.asarray(beta0, dtype=float)
    centre = betas.mean(axis=0)
    mse = float(((betas - beta0) ** 2).mean())
    variance = float(((betas - centre) ** 2).mean())
    bias_sq = float(((centre - beta0) ** 2).mean())
    return mse, variance, bias_sq


def optimal_rate(by_method: Mapping[str, object], beta0) -> dict[str, float]:
    """Share of replications in which each method has the smallest MSE.

    Exact ties split the replication equally among the tied methods.
    """
    if len(by_method) < 2:
        raise ValidationError("optimal rate needs at least two methods")
    names = list(by_method)
    ids = None
    errs = []
    for name in names:
        rep, betas = as_matrix(by_method[name])
        if ids is None:
            ids = rep
        elif rep.shape != ids.shape or not np.array_equal(rep, ids):
            raise ValidationError(f"replication set of {name!r} differs from {names[0]!r}")
        errs.append(replication_mse(betas, beta0))
    errs = np.vstack(errs)
    best = errs == errs.min(axis=0)
    share = best / best.sum(axis=0)
    return {name: float(share[k].mean()) for k, name in enumerate(names)}


def nad_rank_means(by_method: Mapping[str, object], beta0) -> dict[str, np.ndarray]:
    """Mean rank (1 = best) of each method's per-replication NAD, per coefficient.

    Ties receive average ranks.  Zero true coefficients are NaN.
    """
    beta0 = np.asarray(beta0, dtype=float)
    scored = beta0 != 0
    names = list(by_method)
    dev = np.stack([
        np.abs(_betas(by_method[m])[:, scored] - beta0[scored]) / np.abs(beta0[scored]) for m in names
    ])  # methods x N x q
    ranks = rankdata(dev, axis=0, method="average").mean(axis=1)
    out = {}
    for k, name in enumerate(names):
        r = np.full(beta0.shape, np.nan)
        r[scored] = ranks[k]
        out[name] = r
    return out


def mse_vs_full(records, beta_full) -> float:
    """Mean squared distance to the full-data estimate.

    ``beta_full`` is a single vector shared by every replication or an
    ``N x p`` array matched row by row.
    """
    betas = _betas(records)
    beta_full = np.asarray(beta_full, dtype=float)
    return float(((betas - beta_full) ** 2).mean())


@dataclass
class MethodMetrics:
    nad: np.ndarray
    mse: float
    variance: float
    bias_sq: float
    optimal_rate: float | None = None
    nad_rank: np.ndarray | None = None
    mse_full: float | None = None
    replications: int = 0


@dataclass
class MetricsReport:
    methods: dict[str, MethodMetrics] = field(default_factory=dict)
    beta0: np.ndarray | None = None

    def to_dict(self) -> dict:
        def clean(v):
            if isinstance(v, np.ndarray):
                return [None if np.isnan(x) else float(x) for x in v]
            return v

        return {
            "beta0": clean(self.beta0),
            "methods": {
                name: {k: clean(getattr(m, k)) for k in m.__dataclass_fields__}
                for name, m in self.methods.items()
            },
        }

    def rows(self) -> list[tuple[str, str, str, float]]:
        """Flat (method, metric, coefficient, value) rows; scalar metrics use coefficient ``""``."""
        out = []
        for name, m in self.methods.items():
            for metric in ("mse", "variance", "bias_sq", "optimal_rate", "mse_full"):
                v = getattr(m, metric)
                if v is not None:
                    out.append((name, metric, "", float(v)))
            for metric in ("nad", "nad_rank"):
                vec = getattr(m, metric)
                if vec is None:
                    continue
                for j, v in enumerate(vec):
                    if not np.isnan(v):
                        out.append((name, metric, str(j + 1), float(v)))
        return out

    def write(self, directory) -> list[Path]:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        js = directory / "metrics.json"
        js.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")
        flat = directory / "metrics.csv"
        with flat.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["method", "metric", "coefficient", "value"])
            for row in self.rows():
                w.writerow([row[0], row[1], row[2], repr(row[3])])
        return [js, flat]


def evaluate(by_method: Mapping[str, object], beta0, beta_full=None, exclude_from_rate=("full",)) -> MetricsReport:
    """Every metric for every method.

    Methods in ``exclude_from_rate`` are left out of the optimal-rate and
    NAD-rank comparisons.  ``beta_full`` enables ``mse_full``.
    """
    beta0 = np.asarray(beta0, dtype=float)
    report = MetricsReport(beta0=beta0)
    scored = beta0 != 0
    for name, recs in by_method.items():
        betas = _betas(recs)
        mse, var, b2 = mse_decomposed(betas, beta0)
        report.methods[name] = MethodMetrics(
            nad=nad(betas, beta0) if scored.any() else np.full(beta0.shape, np.nan),
            mse=mse, variance=var, bias_sq=b2, replications=int(betas.shape[0]),
            mse_full=None if beta_full is None or name in exclude_from_rate else mse_vs_full(betas, beta_full),
        )
    compared = {k: v for k, v in by_method.items() if k not in exclude_from_rate}
    if len(compared) >= 2:
        for name, rate in optimal_rate(compared, beta0).items():
            report.methods[name].optimal_rate = rate
        if scored.any():
            for name, r in nad_rank_means(compared, beta0).items():
                report.methods[name].nad_rank = r
    return report
