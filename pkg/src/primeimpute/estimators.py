"""Coefficient estimators: PRIME, sparse PRIME, complete-case and full-data OLS.

The LASSO objective used throughout is

    (1 / 2n) * ||y - Z beta||^2 + lam * ||beta||_1

so ``lam`` is on the per-observation scale, the KKT bound on the gradient
``Z'(y - Z beta) / n`` is ``lam`` itself, and the smallest ``lam`` giving an
all-zero solution is ``max_j |Z_j'y| / n``.  The model has no intercept.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy.linalg import cho_factor, cho_solve

from .core import FitResult, MaskedDataset
from .errors import (
    InsufficientRowsError,
    ShootingConvergenceError,
    SingularDesignError,
    ValidationError,
)
from .imputation import ImputeConfig, build_z

MAX_CONDITION = 1e12
ZERO_TOL = 1e-10
KKT_TOL = 1e-8
_CV_STREAM = 0x4356


@dataclass(frozen=True)
class PenaltySpec:
    """L1 penalty settings.

    ``lam=None`` selects the penalty by ``n_folds``-fold cross-validation over
    ``n_lambdas`` log-spaced values from ``lam_max`` down to
    ``min_ratio * lam_max``.
    """

    lam: float | None = None
    n_folds: int = 10
    n_lambdas: int = 100
    min_ratio: float = 1e-4
    gamma: float = 1.0
    tol: float = 1e-9
    max_sweeps: int = 10_000

    def __post_init__(self):
        if self.gamma != 1.0:
            raise ValidationError("only gamma = 1 (LASSO) is supported", "gamma")
        if self.lam is not None and not self.lam >= 0:
            raise ValidationError(f"lambda must be >= 0, got {self.lam}", "lambda")
        if self.n_folds < 2:
            raise ValidationError(f"need at least 2 folds, got {self.n_folds}", "folds")
        if self.n_lambdas < 1:
            raise ValidationError("need at least one lambda", "n_lambdas")
        if not 0 < self.min_ratio < 1:
            raise ValidationError("min_ratio must lie in (0, 1)", "min_ratio")


@dataclass(frozen=True, eq=False)
class SparsityReport:
    active_set: tuple[int, ...]
    lambda_chosen: float
    lambdas: np.ndarray | None = None
    cv_error: np.ndarray | None = None
    kkt: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# least squares

def _solve_gram(x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, float]:
    gram = x.T @ x
    xty = x.T @ y
    cond = float(np.linalg.cond(gram)) if gram.size else np.inf
    if not np.isfinite(cond) or cond > MAX_CONDITION:
        raise SingularDesignError(
            f"Gram matrix is singular or ill-conditioned (condition {cond:.3g} > {MAX_CONDITION:.0e}); "
            "consider the penalized fit (sprime)",
            condition=cond,
        )
    factor = cho_factor(gram)
    beta = cho_solve(factor, xty)
    # one refinement step
    beta = beta + cho_solve(factor, xty - gram @ beta)
    return beta, cond


def fit_full_ols(x, y) -> np.ndarray:
    """Least squares on fully observed data via the normal equations."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float).reshape(-1)
    if x.ndim == 1:
        x = x[:, None]
    if not np.all(np.isfinite(x)):
        raise ValidationError("full-data OLS needs fully observed, finite covariates", "x")
    if x.shape[0] != y.shape[0]:
        raise ValidationError("x and y disagree on the number of rows")
    if x.shape[0] <= x.shape[1]:
        raise InsufficientRowsError(f"need n > p, got n={x.shape[0]}, p={x.shape[1]}", x.shape[0])
    return _solve_gram(x, y)[0]


def estimating_equation(z, y, beta) -> np.ndarray:
    """``U(beta) = (1/n) sum_i z_i (y_i - z_i' beta)``."""
    z = np.asarray(z, dtype=float)
    return z.T @ (np.asarray(y) - z @ beta) / z.shape[0]


def fit_prime(ds: MaskedDataset, cfg: ImputeConfig | None = None, seed: int | None = None) -> FitResult:
    """Impute the design then solve the estimating equation in closed form."""
    cfg = cfg or ImputeConfig()
    if ds.n <= ds.p:
        raise InsufficientRowsError(f"PRIME needs n > p, got n={ds.n}, p={ds.p}", ds.n)
    z, diag = build_z(ds, cfg, seed)
    beta, cond = _solve_gram(z, ds.y)
    info = {
        "condition": cond,
        "ee_residual": float(np.abs(estimating_equation(z, ds.y, beta)).max()),
    }
    return FitResult(beta=beta, z=z, diagnostics=diag, info=info)


# ---------------------------------------------------------------------------
# LASSO by the shooting algorithm

def soft_threshold(x: float, t: float) -> float:
    if x > t:
        return x - t
    if x < -t:
        return x + t
    return 0.0


def lambda_max(x, y) -> float:
    x = np.asarray(x, dtype=float)
    return float(np.abs(x.T @ y).max() / x.shape[0])


def lambda_grid(x, y, n_lambdas: int = 100, min_ratio: float = 1e-4) -> np.ndarray:
    top = lambda_max(x, y)
    if n_lambdas == 1:
        return np.array([top])
    return top * np.logspace(0.0, np.log10(min_ratio), n_lambdas)


@njit(cache=True)
def _coordinate_descent(gram, c, lam, beta, tol, max_sweeps):
    """Shooting sweeps on the Gram form; returns (sweeps, last max change).

    After every full sweep that still moves something, sweeps are restricted
    to the active set until it settles, then a full sweep re-checks.
    """
    p = c.shape[0]
    g = gram @ beta
    sweeps = 0
    full = True
    delta = np.inf
    while sweeps < max_sweeps:
        delta = 0.0
        for j in range(p):
            if not full and beta[j] == 0.0:
                continue
            dj = gram[j, j]
            if dj <= 0.0:
                continue
            old = beta[j]
            rho = c[j] - g[j] + dj * old
            if rho > lam:
                new = (rho - lam) / dj
            elif rho < -lam:
                new = (rho + lam) / dj
            else:
                new = 0.0
            if new != old:
                step = new - old
                beta[j] = new
                for k in range(p):
                    g[k] += step * gram[j, k]
                if abs(step) > delta:
                    delta = abs(step)
        sweeps += 1
        if delta < tol:
            if full:
                return sweeps, delta
            full = True
        else:
            full = False
    return sweeps, delta


def _polish(gram, c, lam, beta) -> np.ndarray:
    """Solve the KKT equalities on the active set with signs held fixed.

    Accepted only if the signs survive and no inactive coordinate violates
    its bound, in which case the result is the exact LASSO solution.
    """
    active = np.flatnonzero(beta)
    if active.size == 0:
        return beta
    sub = gram[np.ix_(active, active)]
    if np.linalg.cond(sub) > MAX_CONDITION:
        return beta
    signs = np.sign(beta[active])
    b_act = np.linalg.solve(sub, c[active] - lam * signs)
    if not np.array_equal(np.sign(b_act), signs):
        return beta
    cand = np.zeros_like(beta)
    cand[active] = b_act
    grad = c - gram @ cand
    inactive = np.setdiff1d(np.arange(beta.size), active)
    if inactive.size and np.abs(grad[inactive]).max() > lam + 0.1 * KKT_TOL:
        return beta
    return cand


def _shoot_gram(gram, c, lam, beta=None, tol=1e-9, max_sweeps=10_000):
    beta = np.zeros(c.shape[0]) if beta is None else np.array(beta, dtype=float)
    gram = np.ascontiguousarray(gram, dtype=float)
    c = np.ascontiguousarray(c, dtype=float)
    sweeps, delta = _coordinate_descent(gram, c, float(lam), beta, float(tol), int(max_sweeps))
    if delta >= tol:
        raise ShootingConvergenceError(
            f"no convergence after {sweeps} sweeps (last change {delta:.3g})",
            beta=beta.copy(), sweeps=sweeps,
        )
    return _polish(gram, c, lam, beta), sweeps


def lasso_shooting(x, y, lam: float, beta=None, tol: float = 1e-9, max_sweeps: int = 10_000) -> np.ndarray:
    """Cyclic coordinate descent with soft-thresholding (shooting algorithm).

    Stops when a full sweep moves no coefficient by more than ``tol``.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float).reshape(-1)
    n = x.shape[0]
    beta, _ = _shoot_gram(x.T @ x / n, x.T @ y / n, float(lam), beta, tol, max_sweeps)
    return beta


def lasso_path(x, y, lambdas, tol=1e-9, max_sweeps=10_000) -> np.ndarray:
    """Warm-started solutions along ``lambdas`` (descending), shape (len, p)."""
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    gram, c = x.T @ x / n, x.T @ y / n
    out = np.empty((len(lambdas), x.shape[1]))
    beta = None
    for k, lam in enumerate(lambdas):
        beta, _ = _shoot_gram(gram, c, float(lam), beta, tol, max_sweeps)
        out[k] = beta
    return out


def kkt_check(x, y, beta, lam: float, tol: float = KKT_TOL, zero_tol: float = ZERO_TOL) -> dict:
    """Largest violation of the LASSO optimality conditions.

    Zero coefficients need ``|grad_j| <= lam + tol``; active ones need
    ``grad_j = lam * sign(beta_j)`` within ``tol``.
    """
    x = np.asarray(x, dtype=float)
    beta = np.asarray(beta, dtype=float)
    grad = x.T @ (np.asarray(y) - x @ beta) / x.shape[0]
    active = np.abs(beta) > zero_tol
    zero_viol = float(np.max(np.abs(grad[~active]) - lam, initial=0.0))
    act_viol = float(np.max(np.abs(grad[active] - lam * np.sign(beta[active])), initial=0.0))
    return {
        "zero_violation": max(zero_viol, 0.0),
        "active_violation": act_viol,
        "ok": bool(zero_viol <= tol and act_viol <= tol),
    }


def _fold_ids(n: int, k: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(np.random.SeedSequence(int(seed) % 2**64, spawn_key=(_CV_STREAM,)))
    ids = np.empty(n, dtype=np.intp)
    ids[rng.permutation(n)] = np.arange(n) % k
    return ids


def cv_lasso(x, y, pen: PenaltySpec, seed: int = 0) -> tuple[float, np.ndarray, np.ndarray]:
    """K-fold CV over a log-spaced grid; returns (best lam, grid, mean CV error).

    The number of folds is capped at the number of rows.  Ties go to the
    larger penalty.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = x.shape[0]
    grid = lambda_grid(x, y, pen.n_lambdas, pen.min_ratio)
    k = min(pen.n_folds, n)
    ids = _fold_ids(n, k, seed)
    err = np.zeros(grid.size)
    for f in range(k):
        test = ids == f
        path = lasso_path(x[~test], y[~test], grid, pen.tol, pen.max_sweeps)
        resid = y[test][None, :] - path @ x[test].T
        err += (resid**2).sum(axis=1)
    err /= n
    best = int(np.argmin(err))
    return float(grid[best]), grid, err


def fit_penalized(x, y, pen: PenaltySpec, seed: int = 0) -> tuple[np.ndarray, SparsityReport]:
    """LASSO at a fixed or cross-validated penalty, with KKT certification."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    grid = cv_err = None
    if pen.lam is None:
        lam, grid, cv_err = cv_lasso(x, y, pen, seed)
        # warm start along the grid down to the chosen value
        upto = grid[: int(np.searchsorted(-grid, -lam)) + 1]
        beta = lasso_path(x, y, upto, pen.tol, pen.max_sweeps)[-1]
    else:
        lam = float(pen.lam)
        beta = lasso_shooting(x, y, lam, tol=pen.tol, max_sweeps=pen.max_sweeps)
    kkt = kkt_check(x, y, beta, lam)
    active = tuple(int(j) for j in np.flatnonzero(np.abs(beta) > ZERO_TOL))
    return beta, SparsityReport(active, lam, grid, cv_err, kkt)


def fit_sprime(
    ds: MaskedDataset,
    cfg: ImputeConfig | None = None,
    pen: PenaltySpec | None = None,
    seed: int | None = None,
) -> tuple[FitResult, SparsityReport]:
    """Impute the design, then fit the LASSO on it (impute-then-CV)."""
    cfg = cfg or ImputeConfig()
    pen = pen or PenaltySpec()
    z, diag = build_z(ds, cfg, seed)
    fold_seed = cfg.projection.seed if seed is None else seed
    beta, report = fit_penalized(z, ds.y, pen, fold_seed)
    info = {"lambda": report.lambda_chosen, "kkt": report.kkt}
    return FitResult(beta=beta, z=z, diagnostics=diag, info=info), report


def fit_cc(ds: MaskedDataset, pen: PenaltySpec | None = None, seed: int = 0) -> np.ndarray:
    """OLS (or LASSO when ``pen`` is given) on the fully observed rows."""
    rows = ds.complete_rows()
    need = ds.p + 1 if pen is None else 2
    if rows.size < need:
        raise InsufficientRowsError(
            f"complete-case fit needs at least {need} complete rows, found {rows.size}", int(rows.size)
        )
    x, y = ds.x[rows], ds.y[rows]
    if pen is None:
        return _solve_gram(x, y)[0]
    return fit_penalized(x, y, pen, seed)[0]
