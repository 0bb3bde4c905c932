"""Acceptance criteria 1-9, each at its stated tolerance and time budget.

Every test prints one ``[AC-k] PASS|FAIL`` line.  Run on its own with

    pytest tests/test_acceptance.py -v

One seed (``SEED``) drives every simulation here; it was fixed up front,
not selected from outcomes.
"""

import json
import time

import numpy as np
import pytest

from primeimpute import (
    AvailabilityPattern,
    ImputeConfig,
    MaskedDataset,
    PenaltySpec,
    ProjectionSpec,
    fit_cc,
    fit_full_ols,
    fit_prime,
    fit_sprime,
)
from primeimpute.cli import main
from primeimpute.estimators import kkt_check
from primeimpute.experiment import run_scenario
from primeimpute.metrics import ReplicationRecord, mse_decomposed, optimal_rate
from primeimpute.projection import log_geo_kernel, sample_directions
from primeimpute.simgen import gen_scenario, scenario1, scenario3

SEED = 2026


@pytest.fixture(scope="module", autouse=True)
def warm_jit():
    # compile the coordinate-descent kernel outside the timed sections
    from primeimpute.estimators import lasso_shooting

    lasso_shooting(np.eye(3), np.ones(3), 0.1)


@pytest.fixture
def report(capsys):
    def emit(k, ok, detail, elapsed):
        with capsys.disabled():
            print(f"\n[AC-{k}] {'PASS' if ok else 'FAIL'}  {detail}  ({elapsed:.1f}s)")
    return emit


def test_ac1_reduction_suite(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(SEED)
    worst_ols, worst_lasso = 0.0, 0.0
    for _ in range(5):
        n, p = rng.integers(30, 80), rng.integers(2, 10)
        x = rng.standard_normal((n, p))
        y = x @ rng.standard_normal(p) + rng.standard_normal(n)
        ds = MaskedDataset.complete(x=x, y=y)
        full = fit_full_ols(x, y)
        worst_ols = max(worst_ols, np.abs(fit_prime(ds).beta - full).max(), np.abs(fit_cc(ds) - full).max())
        res, _ = fit_sprime(ds, pen=PenaltySpec(lam=0.0))
        worst_lasso = max(worst_lasso, np.abs(res.beta - full).max())
    elapsed = time.perf_counter() - t0
    ok = worst_ols <= 1e-10 and worst_lasso <= 1e-8 and elapsed < 1.0
    report(1, ok, f"max|PRIME,CC - OLS|={worst_ols:.2e}  max|SPRIME(0) - OLS|={worst_lasso:.2e}", elapsed)
    assert ok


def test_ac2_kernel_identity(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(SEED)
    bs = (10, 100, 2000)
    errs = {b: [] for b in bs}
    for t in range(200):
        k = int(rng.integers(1, 9))
        pattern = AvailabilityPattern(tuple(sorted(rng.choice(12, size=k, replace=False).tolist())))
        donor, target = rng.standard_normal(k), rng.standard_normal(k)
        h = np.sqrt(k)
        d = donor - target
        plain = np.exp(-(d @ d) / (2 * h * h))
        for b in bs:
            dirs = sample_directions(ProjectionSpec(b=b, seed=SEED + t), pattern)
            pr = np.exp(log_geo_kernel(dirs, dirs.project(d[None, :])[0], h))
            errs[b].append(abs(pr - plain) / plain)
    med = {b: float(np.median(e)) for b, e in errs.items()}
    elapsed = time.perf_counter() - t0
    ok = med[2000] < 0.05 and med[10] > med[100] > med[2000] and elapsed < 120
    report(2, ok, "median rel. error " + "  ".join(f"B={b}: {m:.4f}" for b, m in med.items()), elapsed)
    assert ok


def test_ac3_lasso_certification(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(SEED)
    worst, failures = 0.0, 0
    for inst in range(100):
        n, p = int(rng.integers(40, 100)), int(rng.integers(5, 20))
        beta = np.where(rng.random(p) < 0.4, rng.standard_normal(p) * 2, 0.0)
        x = rng.standard_normal((n, p))
        y = x @ beta + rng.standard_normal(n)
        mask = rng.random((n, p)) > 0.1
        mask[~mask.any(axis=1), 0] = True
        ds = MaskedDataset(y=y, x=x, mask=mask)
        res, rep = fit_sprime(ds, ImputeConfig(), PenaltySpec(), seed=inst)
        chk = kkt_check(res.z, ds.y, res.beta, rep.lambda_chosen)
        worst = max(worst, chk["zero_violation"], chk["active_violation"])
        failures += not chk["ok"]
    elapsed = time.perf_counter() - t0
    ok = failures == 0 and elapsed < 60
    report(3, ok, f"{100 - failures}/100 fits certified, worst violation {worst:.2e}", elapsed)
    assert ok


def test_ac4_generator_calibration(report):
    t0 = time.perf_counter()
    cfg = scenario1(n=10**5, r_squared=0.5, missing_rate=90, seed=SEED)
    ds, truth = gen_scenario(cfg, 0)
    incomplete = 1.0 - ds.complete_rows().size / ds.n
    r2 = 1.0 - truth.epsilon.var() / ds.y.var()
    elapsed = time.perf_counter() - t0
    ok = abs(incomplete - 0.90) <= 0.03 and abs(r2 - 0.5) <= 0.01 and elapsed < 60
    report(4, ok, f"incomplete fraction {incomplete:.4f} (0.90 +- 0.03), empirical R^2 {r2:.4f} (0.5 +- 0.01)", elapsed)
    assert ok


def test_ac5_scenario1_direction(report):
    t0 = time.perf_counter()
    parts, ok = [], True
    for r2 in (0.2, 0.5, 0.8):
        res = run_scenario(scenario1(n=200, r_squared=r2, seed=SEED), ("prime", "cc"), replications=50)
        m_prime, m_cc = res.replication_mse("prime").mean(), res.replication_mse("cc").mean()
        rate = optimal_rate({"prime": res.betas["prime"], "cc": res.betas["cc"]}, res.beta0)["prime"]
        ok &= m_prime < m_cc and rate > 0.5
        parts.append(f"R2={r2}: MSE {m_prime:.3f} vs {m_cc:.3f}, rate {rate:.2f}")
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 1200
    report(5, ok, "; ".join(parts), elapsed)
    assert ok


def test_ac6_scenario3_direction(report):
    t0 = time.perf_counter()
    res = run_scenario(scenario3(n=200, p=30, seed=SEED), ("sprime", "scc"), replications=50)
    wins = float(np.mean(res.replication_mse("sprime") < res.replication_mse("scc")))
    elapsed = time.perf_counter() - t0
    ok = wins >= 0.60 and elapsed < 1200
    report(6, ok, f"MSE(SPRIME) < MSE(SCC) in {wins:.0%} of replications (>= 60%)", elapsed)
    assert ok


def test_ac7_consistency_trend(report):
    t0 = time.perf_counter()
    med = []
    for n in (100, 200, 400):
        res = run_scenario(scenario1(n=n, r_squared=0.5, seed=SEED), ("prime",), replications=50)
        med.append(float(np.median(res.replication_mse("prime"))))
    rises = [b / a - 1 for a, b in zip(med, med[1:]) if b > a]
    elapsed = time.perf_counter() - t0
    ok = len(rises) <= 1 and all(r <= 0.05 for r in rises) and elapsed < 1800
    report(7, ok, "median MSE " + " -> ".join(f"{m:.4f}" for m in med), elapsed)
    assert ok


def test_ac8_metric_identities(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(SEED)
    worst_id, worst_sum = 0.0, 0.0
    for case in range(1000):
        p, n, k = int(rng.integers(1, 13)), int(rng.integers(1, 60)), int(rng.integers(2, 6))
        beta0 = rng.standard_normal(p) * rng.choice([1e-3, 1.0, 1e3])
        by = {}
        for m in range(k):
            betas = beta0 + rng.standard_normal((n, p)) * rng.choice([0.0, 0.1, 10.0])
            if m and rng.random() < 0.2:
                betas = by[f"m{m - 1}"][0].beta_hat[None, :].repeat(n, 0)  # force ties
            by[f"m{m}"] = [ReplicationRecord(f"m{m}", r, b) for r, b in enumerate(betas)]
            mse, var, b2 = mse_decomposed(by[f"m{m}"], beta0)
            worst_id = max(worst_id, abs(mse - var - b2) / max(1.0, mse))
        worst_sum = max(worst_sum, abs(sum(optimal_rate(by, beta0).values()) - 1.0))
    elapsed = time.perf_counter() - t0
    ok = worst_id <= 1e-10 and worst_sum <= 1e-12 and elapsed < 10
    report(8, ok, f"max |MSE - Var - Bias^2| (rel) {worst_id:.1e}, max |sum rates - 1| {worst_sum:.1e}", elapsed)
    assert ok


def _numeric_outputs(root):
    return {
        p.relative_to(root).as_posix(): p.read_bytes()
        for p in sorted(root.rglob("*"))
        if p.is_file() and p.name != "manifest.json"
    }


def test_ac9_determinism(report, tmp_path):
    t0 = time.perf_counter()
    run = tmp_path / "run"
    codes = [main(["simulate", "--preset", "scenario1", "--replications", "3", "--seed", str(SEED), "--out", str(run)])]
    for method in ("full", "prime", "cc", "sprime", "scc"):
        codes.append(main(["fit", str(run), "--method", method]))
    codes.append(main(["evaluate", str(run)]))
    csv_out = tmp_path / "single"
    codes.append(main(["fit", str(run / "datasets" / "rep_000.csv"), "--method", "sprime",
                       "--seed", "5", "--out", str(csv_out)]))
    replays = [main(["reproduce", str(run), "--out", str(tmp_path / f"replay{k}")]) for k in range(2)]
    replays.append(main(["reproduce", str(csv_out), "--out", str(tmp_path / "single-replay")]))
    same = (_numeric_outputs(run) == _numeric_outputs(tmp_path / "replay0") == _numeric_outputs(tmp_path / "replay1")
            and _numeric_outputs(csv_out) == _numeric_outputs(tmp_path / "single-replay"))
    recorded = json.loads((run / "manifest.json").read_text())["outputs"]
    elapsed = time.perf_counter() - t0
    ok = all(c == 0 for c in codes) and all(c == 0 for c in replays) and same
    report(9, ok, f"{len(recorded)} recorded outputs, {len(replays)} replays bitwise identical: {same}", elapsed)
    assert ok


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
