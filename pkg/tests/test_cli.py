import json
import subprocess
import sys
import time

import numpy as np
import pytest

from primeimpute import MaskedDataset, write_csv
from primeimpute.cli import main, reproduce

METHOD_SET = ("full", "prime", "cc", "sprime", "scc")


def _files(root):
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def _numeric(root):
    return {k: v for k, v in _files(root).items() if not k.endswith("manifest.json")}


def _sim(tmp_path, name="run", *extra):
    out = tmp_path / name
    assert main(["simulate", "--preset", "scenario1", "--replications", "2", "--seed", "7", "--out", str(out), *extra]) == 0
    return out


def _csv(tmp_path, with_na=False, name="d.csv"):
    rng = np.random.default_rng(1)
    x = rng.standard_normal((40, 3))
    mask = np.ones_like(x, dtype=bool)
    if with_na:
        mask[3, 1] = mask[10, 0] = False
    ds = MaskedDataset(y=x @ [1.0, -2.0, 0.5] + 0.1 * rng.standard_normal(40), x=x, mask=mask)
    path = tmp_path / name
    write_csv(ds, path)
    return path


def test_simulate_file_contract(tmp_path):
    out = _sim(tmp_path)
    data = sorted(p.name for p in (out / "datasets").iterdir())
    assert data == ["rep_000.csv", "rep_000.truth.json", "rep_001.csv", "rep_001.truth.json"]
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["seed"] == 7 and manifest["steps"] == [{"command": "simulate"}]
    assert manifest["config"]["scenario"]["replications"] == 2


def test_simulate_invalid_r_squared(tmp_path, capsys):
    code = main(["simulate", "--preset", "scenario1", "--r-squared", "1.2", "--out", str(tmp_path / "bad")])
    assert code == 2
    assert "r_squared" in capsys.readouterr().err


def test_config_file_errors_name_field(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"preset": "scenario1", "scenario": {"rho": 1.5}}))
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    assert "scenario.rho" in capsys.readouterr().err
    cfg.write_text(json.dumps({"fit": {"b": 0}}))
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    assert "fit" in capsys.readouterr().err


def test_simulate_twice_identical(tmp_path):
    a, b = _sim(tmp_path, "a"), _sim(tmp_path, "b")
    assert _numeric(a) == _numeric(b)


def test_refuses_non_empty_out(tmp_path):
    out = _sim(tmp_path)
    assert main(["simulate", "--preset", "scenario1", "--out", str(out)]) == 4


def test_full_on_missing_file_is_precondition_error(tmp_path, capsys):
    path = _csv(tmp_path, with_na=True)
    assert main(["fit", str(path), "--method", "full", "--out", str(tmp_path / "f")]) == 2
    assert "complete" in capsys.readouterr().err


def test_missing_input_file_is_io_error(tmp_path):
    assert main(["fit", str(tmp_path / "nope.csv"), "--method", "prime", "--out", str(tmp_path / "f")]) == 4


def test_prime_fit_deterministic(tmp_path):
    path = _csv(tmp_path, with_na=True)
    for name in ("a", "b"):
        assert main(["fit", str(path), "--method", "prime", "--seed", "42", "--out", str(tmp_path / name)]) == 0
    assert _numeric(tmp_path / "a") == _numeric(tmp_path / "b")


def test_sprime_lambda_zero_matches_prime(tmp_path):
    path = _csv(tmp_path)
    assert main(["fit", str(path), "--method", "prime", "--out", str(tmp_path / "p")]) == 0
    assert main(["fit", str(path), "--method", "sprime", "--lambda", "0", "--out", str(tmp_path / "s")]) == 0
    p = json.loads((tmp_path / "p" / "coefficients.json").read_text())["beta"]
    s = json.loads((tmp_path / "s" / "coefficients.json").read_text())["beta"]
    np.testing.assert_allclose(s, p, rtol=0, atol=1e-8)


def test_evaluate_planted_truth(tmp_path):
    out = _sim(tmp_path)
    dest = out / "fits" / "oracle"
    dest.mkdir(parents=True)
    for r in range(2):
        beta0 = json.loads((out / "datasets" / f"rep_{r:03d}.truth.json").read_text())["beta0"]
        (dest / f"rep_{r:03d}.json").write_text(json.dumps({"replication": r, "beta": beta0}))
    assert main(["evaluate", str(out)]) == 0
    doc = json.loads((out / "metrics" / "metrics.json").read_text())
    m = doc["methods"]["oracle"]
    assert m["mse"] == 0.0 and all(v == 0.0 for v in m["nad"])


def test_evaluate_two_methods_rates_sum(tmp_path):
    out = _sim(tmp_path)
    for method in ("prime", "cc"):
        assert main(["fit", str(out), "--method", method]) == 0
    assert main(["evaluate", str(out)]) == 0
    doc = json.loads((out / "metrics" / "metrics.json").read_text())
    rates = [doc["methods"][m]["optimal_rate"] for m in ("prime", "cc")]
    assert sum(rates) == pytest.approx(1.0, abs=1e-12)


def test_evaluate_without_fits_is_io_error(tmp_path):
    assert main(["evaluate", str(_sim(tmp_path))]) == 4


def test_reproduce_run(tmp_path, capsys):
    out = _sim(tmp_path)
    for method in ("prime", "scc"):
        assert main(["fit", str(out), "--method", method]) == 0
    assert main(["evaluate", str(out)]) == 0
    assert main(["reproduce", str(out / "manifest.json"), "--out", str(tmp_path / "replay")]) == 0
    assert "identical" in capsys.readouterr().out
    assert _numeric(out) == _numeric(tmp_path / "replay")


def test_reproduce_detects_tampering(tmp_path):
    out = _sim(tmp_path)
    assert main(["fit", str(out), "--method", "cc"]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    manifest["outputs"]["fits/cc/rep_000.csv"] = "0" * 64
    (out / "manifest.json").write_text(json.dumps(manifest))
    ok, diff = reproduce(out / "manifest.json", tmp_path / "replay")
    assert not ok and "fits/cc/rep_000.csv" in diff
    assert main(["reproduce", str(out), "--out", str(tmp_path / "replay2")]) == 5


def test_reproduce_file_fit(tmp_path):
    path = _csv(tmp_path, with_na=True)
    assert main(["fit", str(path), "--method", "sprime", "--seed", "3", "--folds", "4", "--out", str(tmp_path / "f")]) == 0
    assert main(["reproduce", str(tmp_path / "f"), "--out", str(tmp_path / "g")]) == 0


def test_smoke_all_methods(tmp_path):
    t0 = time.perf_counter()
    out = tmp_path / "smoke"
    assert main(["simulate", "--preset", "scenario1", "--replications", "10", "--n", "100", "--out", str(out)]) == 0
    for method in METHOD_SET:
        assert main(["fit", str(out), "--method", method]) == 0
    assert main(["evaluate", str(out)]) == 0
    doc = json.loads((out / "metrics" / "metrics.json").read_text())
    assert set(doc["methods"]) == set(METHOD_SET)
    assert time.perf_counter() - t0 < 300


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "primeimpute", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and "primeimpute" in res.stdout
