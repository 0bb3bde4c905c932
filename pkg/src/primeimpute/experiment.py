"""Monte-Carlo harness: generate replications, fit every method, collect estimates.

Each replication ``r`` of a scenario draws its data from the stream
``(cfg.seed, r)`` and fits with seed ``replication_seed(cfg.seed, r)``, so
runs are identical whether replications are processed sequentially or in
parallel.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields
from functools import partial

import numpy as np

from .core import KernelSpec, MaskedDataset, ProjectionSpec
from .errors import ValidationError
from .estimators import PenaltySpec, fit_cc, fit_full_ols, fit_prime, fit_sprime
from .imputation import ImputeConfig
from .simgen import ScenarioConfig, Truth, gen_scenario, replication_seed

METHODS = ("full", "prime", "cc", "sprime", "scc")


@dataclass(frozen=True)
class FitSettings:
    """Estimator knobs shared by a run; field names match the CLI flags."""

    b: int = 100
    dist: str = "gaussian"
    s: float | str | None = None
    bandwidth: float | None = None
    exponent: float = -1.0 / 3.0
    imputer: str = "prime"
    fallback: str = "relaxed"
    lam: float | None = None
    folds: int = 10
    n_lambdas: int = 100

    def __post_init__(self):
        # construct once to surface validation errors early
        self.impute_config(0)
        self.penalty()

    def impute_config(self, seed: int) -> ImputeConfig:
        return ImputeConfig(
            method=self.imputer,
            projection=ProjectionSpec(b=self.b, dist=self.dist, s=self.s, seed=seed),
            kernel=KernelSpec(h=self.bandwidth, exponent=self.exponent),
            fallback=self.fallback,
        )

    def penalty(self) -> PenaltySpec:
        return PenaltySpec(lam=self.lam, n_folds=self.folds, n_lambdas=self.n_lambdas)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict | None) -> "FitSettings":
        d = dict(d or {})
        unknown = set(d) - {f.name for f in fields(cls)}
        if unknown:
            raise ValidationError(f"unknown field(s) {sorted(unknown)}", "fit")
        return cls(**d)


def fit_method(method: str, ds: MaskedDataset, settings: FitSettings, seed: int, x_full=None):
    """Fit one method; returns ``(beta, info)`` with JSON-ready ``info``.

    ``x_full`` supplies the complete covariates for ``method="full"`` when
    ``ds`` itself has missing cells.
    """
    if method not in METHODS:
        raise ValidationError(f"unknown method {method!r}; choose from {list(METHODS)}", "method")
    info: dict = {}
    if method == "full":
        if x_full is None:
            if not ds.is_complete():
                raise ValidationError(
                    f"the full-data fit needs a complete dataset; {ds.n_missing} cells are missing", "method"
                )
            x_full = ds.x
        beta = fit_full_ols(x_full, ds.y)
    elif method == "prime":
        res = fit_prime(ds, settings.impute_config(seed))
        beta = res.beta
        info = {"imputation": res.diagnostics.summary(), **res.info}
    elif method == "sprime":
        res, rep = fit_sprime(ds, settings.impute_config(seed), settings.penalty(), seed)
        beta = res.beta
        info = {
            "imputation": res.diagnostics.summary(),
            "lambda": rep.lambda_chosen, "active_set": list(rep.active_set), "kkt": rep.kkt,
        }
    elif method == "cc":
        beta = fit_cc(ds)
        info = {"complete_rows": int(ds.complete_rows().size)}
    else:
        beta = fit_cc(ds, settings.penalty(), seed)
        info = {"complete_rows": int(ds.complete_rows().size)}
    return np.asarray(beta, dtype=float), info


def run_replication(cfg: ScenarioConfig, replication: int, methods, settings: FitSettings):
    ds, truth = gen_scenario(cfg, replication)
    seed = replication_seed(cfg.seed, replication)
    betas = {m: fit_method(m, ds, settings, seed, x_full=truth.x_full)[0] for m in methods}
    return betas, truth


@dataclass(frozen=True, eq=False)
class SimulationResult:
    config: ScenarioConfig
    betas: dict[str, np.ndarray]
    truths: list[Truth]

    @property
    def beta0(self) -> np.ndarray:
        return np.asarray(self.config.beta0)

    def replication_mse(self, method: str) -> np.ndarray:
        return ((self.betas[method] - self.beta0) ** 2).mean(axis=1)


def run_scenario(
    cfg: ScenarioConfig,
    methods=("prime", "cc"),
    settings: FitSettings | None = None,
    replications: int | None = None,
    jobs: int = 1,
) -> SimulationResult:
    """Fit ``methods`` on ``replications`` (default ``cfg.replications``) datasets."""
    settings = settings or FitSettings()
    reps = range(cfg.replications if replications is None else replications)
    work = partial(run_replication, cfg, methods=tuple(methods), settings=settings)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            out = list(pool.map(work, reps))
    else:
        out = [work(r) for r in reps]
    betas = {m: np.vstack([o[0][m] for o in out]) for m in methods}
    return SimulationResult(cfg, betas, [o[1] for o in out])
