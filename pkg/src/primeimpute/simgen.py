"""Simulated regression data with two-group missing-covariate patterns.

Covariates are multivariate normal with an exchangeable or AR(1) correlation
matrix, noise is Gaussian with variance set by a target R^2, and each unit
is assigned a missing pattern in two stages:

1. with probability ``a`` a pattern drawn uniformly from group 1;
2. otherwise, with probability ``1 / (1 + exp(b * eps_i + c))``, a pattern
   drawn uniformly from group 2;
3. otherwise the unit is complete.

Patterns are stored as sets of *missing* 0-based column indices; columns 9,
10 and 11 (and every column past the twelfth) are never masked.
"""

from __future__ import annotations

import inspect
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from scipy.special import expit

from .core import AvailabilityPattern, MaskedDataset
from .errors import ValidationError

BETA_SCENARIO = (1.0, -0.6, 1.5, 1.0, 1.2, 0.4, -1.0, -0.7, 1.3, 0.5, 1.1, -1.4)
ALWAYS_OBSERVED = (9, 10, 11)

GROUP1_MISSING = (
    (2,),          # A1
    (5,),          # A2
    (8,),          # A3
    (0, 3),        # A4
    (0, 6),        # A5
    (3, 6),        # A6
)
GROUP2_MISSING = (
    (0, 1, 2),                 # A7
    (3, 4, 5),                 # A8
    (6, 7, 8),                 # A9
    (0, 1, 2, 3, 4, 5),        # A10
    (0, 1, 2, 6, 7, 8),        # A11
    (3, 4, 5, 6, 7, 8),        # A12
)

R2_GRID = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)
# (a, b, c) by target missing rate, indexed like R2_GRID
MISSING_RATE_TABLE = {
    60: (
        (0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1),
        (-1.5, -1.5, -1.5, -1.5, -1.5, -1.5, -2.0, -2.0, -4.0),
        (-4.0, -2.0, -2.0, -1.5, -1.5, -1.0, -1.0, -1.0, -1.0),
    ),
    90: (
        (0.75, 0.75, 0.75, 0.75, 0.75, 0.75, 0.75, 0.75, 0.65),
        (-1.5, -1.5, -2.0, -2.0, -3.0, -3.0, -3.5, -3.5, -4.0),
        (-4.0, -4.0, -4.0, -4.0, -4.0, -4.0, -4.0, -4.0, -4.0),
    ),
}


def missing_rate_params(missing_rate: int, r_squared: float) -> tuple[float, float, float]:
    """(a, b, c) for a 60% or 90% missing rate at an R^2 on the 0.1 grid."""
    if missing_rate not in MISSING_RATE_TABLE:
        raise ValidationError(f"missing rate must be 60 or 90, got {missing_rate}", "missing_rate")
    hits = [k for k, r in enumerate(R2_GRID) if abs(r - r_squared) < 1e-9]
    if not hits:
        raise ValidationError(f"no tabulated setting for R^2={r_squared}", "r_squared")
    a, b, c = MISSING_RATE_TABLE[missing_rate]
    k = hits[0]
    return a[k], b[k], c[k]


@dataclass(frozen=True)
class MissingConfig:
    a: float = 0.1
    b: float = -1.5
    c: float = -1.5
    group1: tuple[tuple[int, ...], ...] = GROUP1_MISSING
    group2: tuple[tuple[int, ...], ...] = GROUP2_MISSING
    always_observed: tuple[int, ...] = ALWAYS_OBSERVED

    def __post_init__(self):
        g1 = tuple(tuple(sorted(int(j) for j in g)) for g in self.group1)
        g2 = tuple(tuple(sorted(int(j) for j in g)) for g in self.group2)
        if not g1 or not g2:
            raise ValidationError("pattern groups must be non-empty", "missing.group1/group2")
        keep = set(self.always_observed)
        for name, group in (("group1", g1), ("group2", g2)):
            for g in group:
                if keep & set(g):
                    raise ValidationError(f"pattern {g} masks an always-observed column", f"missing.{name}")
        object.__setattr__(self, "group1", g1)
        object.__setattr__(self, "group2", g2)
        object.__setattr__(self, "always_observed", tuple(self.always_observed))

    @property
    def a_prob(self) -> float:
        # a outside [0, 1] (the residual-driven protocol uses a = -1.5) is clamped
        return float(min(max(self.a, 0.0), 1.0))

    def patterns(self, p: int) -> tuple[list[AvailabilityPattern], list[AvailabilityPattern]]:
        def build(group):
            return [AvailabilityPattern(tuple(j for j in range(p) if j not in set(g))) for g in group]

        return build(self.group1), build(self.group2)

    def group2_probability(self, epsilon) -> np.ndarray:
        return expit(-(self.b * np.asarray(epsilon, dtype=float) + self.c))


CORRELATIONS = ("exchangeable", "ar1")


@dataclass(frozen=True)
class ScenarioConfig:
    n: int = 100
    p: int = 12
    beta0: tuple[float, ...] = BETA_SCENARIO
    corr: str = "exchangeable"
    rho: float = 0.5
    r_squared: float = 0.5
    missing: MissingConfig = field(default_factory=MissingConfig)
    replications: int = 100
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "beta0", tuple(float(b) for b in self.beta0))
        if self.n < 2:
            raise ValidationError(f"must be >= 2, got {self.n}", "n")
        if self.p < 1:
            raise ValidationError(f"must be >= 1, got {self.p}", "p")
        if len(self.beta0) != self.p:
            raise ValidationError(f"has {len(self.beta0)} entries for p={self.p}", "beta0")
        if self.corr not in CORRELATIONS:
            raise ValidationError(f"unknown correlation structure {self.corr!r}", "corr")
        if not 0.0 <= self.rho < 1.0:
            raise ValidationError(f"must lie in [0, 1), got {self.rho}", "rho")
        if not 0.0 < self.r_squared < 1.0:
            raise ValidationError(f"must lie in (0, 1), got {self.r_squared}", "r_squared")
        if self.replications < 1:
            raise ValidationError(f"must be >= 1, got {self.replications}", "replications")
        object.__setattr__(self, "seed", int(self.seed) % 2**64)

    @property
    def sigma(self) -> np.ndarray:
        return correlation_matrix(self.p, self.corr, self.rho)

    @property
    def signal_variance(self) -> float:
        b = np.asarray(self.beta0)
        return float(b @ self.sigma @ b)

    @property
    def sigma2(self) -> float:
        return noise_variance(self.signal_variance, self.r_squared)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["beta0"] = list(self.beta0)
        d["missing"] = {
            k: [list(g) for g in v] if k.startswith("group") else (list(v) if isinstance(v, tuple) else v)
            for k, v in d["missing"].items()
        }
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioConfig":
        d = dict(d)
        if "missing" in d and isinstance(d["missing"], dict):
            d["missing"] = MissingConfig(**d["missing"])
        if "beta0" in d:
            d["beta0"] = tuple(d["beta0"])
        return cls(**d)


def correlation_matrix(p: int, corr: str = "exchangeable", rho: float = 0.5) -> np.ndarray:
    if corr == "exchangeable":
        s = np.full((p, p), float(rho))
        np.fill_diagonal(s, 1.0)
        return s
    if corr == "ar1":
        idx = np.arange(p)
        return float(rho) ** np.abs(idx[:, None] - idx[None, :])
    raise ValidationError(f"unknown correlation structure {corr!r}", "corr")


def noise_variance(signal_variance: float, r_squared: float) -> float:
    """sigma^2 such that signal / (signal + sigma^2) = R^2."""
    if not 0.0 < r_squared < 1.0:
        raise ValidationError(f"must lie in (0, 1), got {r_squared}", "r_squared")
    return signal_variance * (1.0 - r_squared) / r_squared


def gen_covariates(cfg: ScenarioConfig, rng: np.random.Generator) -> np.ndarray:
    """n i.i.d. rows of N(0, Sigma) through the Cholesky factor of Sigma."""
    try:
        chol = np.linalg.cholesky(cfg.sigma)
    except np.linalg.LinAlgError:
        raise ValidationError("covariance matrix is not positive definite", "rho") from None
    return rng.standard_normal((cfg.n, cfg.p)) @ chol.T


def gen_response(x, beta0, r_squared: float, rng: np.random.Generator, sigma=None):
    """``y = x beta0 + eps`` with ``Var(eps)`` set by the population R^2.

    ``sigma`` is the population covariance of the covariate rows; the signal
    variance is ``beta0' sigma beta0``.  Returns ``(y, eps)``.
    """
    x = np.asarray(x, dtype=float)
    beta0 = np.asarray(beta0, dtype=float)
    if sigma is None:
        raise ValidationError("covariate covariance is required to calibrate the noise", "sigma")
    s2 = noise_variance(float(beta0 @ np.asarray(sigma) @ beta0), r_squared)
    eps = rng.standard_normal(x.shape[0]) * np.sqrt(s2)
    return x @ beta0 + eps, eps


def apply_missingness(x, epsilon, mcfg: MissingConfig, rng: np.random.Generator):
    """Observation mask under the two-stage group assignment.

    Returns ``(mask, labels)`` where ``labels[i]`` is 0 for a complete row,
    ``k`` in 1..6 for group-1 pattern A_k and 7..12 for group 2 (with the
    default pattern lists).  All uniforms are drawn for every row so the
    stream does not depend on branch outcomes.
    """
    x = np.asarray(x)
    n, p = x.shape
    g1, g2 = mcfg.patterns(p)
    u1 = rng.random(n)
    k1 = rng.integers(len(g1), size=n)
    u2 = rng.random(n)
    k2 = rng.integers(len(g2), size=n)

    in1 = u1 < mcfg.a_prob
    in2 = ~in1 & (u2 < mcfg.group2_probability(epsilon))
    labels = np.zeros(n, dtype=np.int64)
    labels[in1] = 1 + k1[in1]
    labels[in2] = 1 + len(g1) + k2[in2]

    table = np.vstack([np.ones(p, dtype=bool)] + [pat.mask(p) for pat in g1 + g2])
    return table[labels], labels


@dataclass(frozen=True, eq=False)
class Truth:
    beta0: np.ndarray
    epsilon: np.ndarray
    x_full: np.ndarray
    labels: np.ndarray
    sigma2: float
    replication: int

    def to_dict(self) -> dict:
        return {
            "beta0": self.beta0.tolist(),
            "epsilon": self.epsilon.tolist(),
            "x_full": self.x_full.tolist(),
            "labels": self.labels.tolist(),
            "sigma2": self.sigma2,
            "replication": self.replication,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Truth":
        return cls(
            beta0=np.asarray(d["beta0"], dtype=float),
            epsilon=np.asarray(d["epsilon"], dtype=float),
            x_full=np.asarray(d["x_full"], dtype=float),
            labels=np.asarray(d["labels"], dtype=np.int64),
            sigma2=float(d["sigma2"]),
            replication=int(d["replication"]),
        )


def replication_rng(seed: int, replication: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(seed) % 2**64, spawn_key=(int(replication),)))


def replication_seed(seed: int, replication: int, stream: int = 1) -> int:
    """A 64-bit seed for fits on replication ``replication``, independent of the data stream."""
    ss = np.random.SeedSequence(int(seed) % 2**64, spawn_key=(int(replication), int(stream)))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def gen_scenario(cfg: ScenarioConfig, replication: int = 0) -> tuple[MaskedDataset, Truth]:
    """One replication, fully determined by ``(cfg, replication)``."""
    rng = replication_rng(cfg.seed, replication)
    x = gen_covariates(cfg, rng)
    y, eps = gen_response(x, cfg.beta0, cfg.r_squared, rng, sigma=cfg.sigma)
    mask, labels = apply_missingness(x, eps, cfg.missing, rng)
    ds = MaskedDataset(y=y, x=x, mask=mask)
    truth = Truth(np.asarray(cfg.beta0), eps, x, labels, cfg.sigma2, int(replication))
    return ds, truth


def residual_missingness(ds: MaskedDataset, mcfg: MissingConfig, rng: np.random.Generator, beta_full=None):
    """Mask a complete dataset using residuals of the full-data fit as ``eps``.

    Returns the masked dataset and the residuals.
    """
    from .estimators import fit_full_ols

    if not ds.is_complete():
        raise ValidationError("residual-driven masking needs a complete dataset")
    if beta_full is None:
        beta_full = fit_full_ols(ds.x, ds.y)
    resid = ds.y - ds.x @ beta_full
    mask, _ = apply_missingness(ds.x, resid, mcfg, rng)
    return MaskedDataset(y=ds.y, x=ds.x, mask=mask, columns=ds.columns, response=ds.response), resid


# ---------------------------------------------------------------------------
# presets

SCENARIO2_CORR = {
    "p1": ("exchangeable", 0.2),
    "p2": ("exchangeable", 0.5),
    "p3": ("exchangeable", 0.8),
    "p4": ("ar1", 0.8),
}
SCENARIO2_MISSING = {60: (0.1, -2.0, -1.0), 90: (0.7, -3.5, -4.0)}
RESIDUAL_MISSING = MissingConfig(a=-1.5, b=-2.0, c=0.4)


def scenario1(n: int = 100, r_squared: float = 0.5, missing_rate: int = 60, **kw) -> ScenarioConfig:
    a, b, c = missing_rate_params(missing_rate, r_squared)
    return ScenarioConfig(n=n, r_squared=r_squared, missing=MissingConfig(a=a, b=b, c=c), **kw)


def scenario2(n: int = 100, corr: str = "p2", missing_rate: int = 60, **kw) -> ScenarioConfig:
    if corr not in SCENARIO2_CORR:
        raise ValidationError(f"must be one of {sorted(SCENARIO2_CORR)}, got {corr!r}", "corr")
    if missing_rate not in SCENARIO2_MISSING:
        raise ValidationError(f"must be 60 or 90, got {missing_rate}", "missing_rate")
    kind, rho = SCENARIO2_CORR[corr]
    a, b, c = SCENARIO2_MISSING[missing_rate]
    return ScenarioConfig(
        n=n, corr=kind, rho=rho, r_squared=0.7, missing=MissingConfig(a=a, b=b, c=c), **kw
    )


def scenario3(n: int = 200, p: int = 30, missing_rate: int = 60, **kw) -> ScenarioConfig:
    a, b, c = missing_rate_params(missing_rate, 0.7)
    beta0 = BETA_SCENARIO + (0.0,) * (p - len(BETA_SCENARIO))
    return ScenarioConfig(
        n=n, p=p, beta0=beta0, r_squared=0.7, missing=MissingConfig(a=a, b=b, c=c), **kw
    )


PRESETS = {"scenario1": scenario1, "scenario2": scenario2, "scenario3": scenario3}


def preset(name: str, **overrides) -> ScenarioConfig:
    """Build a named preset; keyword overrides are preset arguments or config fields."""
    if name not in PRESETS:
        raise ValidationError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}", "preset")
    factory = PRESETS[name]
    accepted = set(inspect.signature(factory).parameters) - {"kw"}
    direct = {k: v for k, v in overrides.items() if k in accepted}
    rest = {k: v for k, v in overrides.items() if k not in accepted}
    base = factory(**direct)
    fields = set(ScenarioConfig.__dataclass_fields__)
    unknown = set(rest) - fields
    if unknown:
        raise ValidationError(f"unknown field(s) {sorted(unknown)}", "scenario")
    if "missing" in rest and isinstance(rest["missing"], dict):
        rest["missing"] = replace(base.missing, **rest["missing"])
    if "beta0" in rest:
        rest["beta0"] = tuple(rest["beta0"])
    return replace(base, **rest)
