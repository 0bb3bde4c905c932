"""Command-line front end.

Run directory layout::

    RUN/
      manifest.json          resolved config, steps, timings, output hashes
      datasets/rep_000.csv   one file per replication (+ rep_000.truth.json)
      fits/<method>/rep_000.json, rep_000.csv
      metrics/metrics.json, metrics.csv

Configuration precedence: command-line flags > config file > preset defaults.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .core import load_csv, write_csv
from .errors import EXIT_IO, EXIT_OK, PrimeError, RunIOError, ValidationError
from .experiment import METHODS, FitSettings, fit_method
from .metrics import ReplicationRecord, evaluate
from .simgen import ScenarioConfig, Truth, gen_scenario, preset, replication_seed

EXIT_MISMATCH = 5
MANIFEST = "manifest.json"


# ---------------------------------------------------------------------------
# helpers

def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(_dump(obj), encoding="utf-8")


def _read_json(path: Path):
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise RunIOError(f"missing file: {path}") from None
    except json.JSONDecodeError as exc:
        raise ValidationError(f"invalid JSON in {path}: {exc}") from None


def _sha256(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _inventory(run: Path) -> dict[str, str]:
    return {
        p.relative_to(run).as_posix(): _sha256(p)
        for p in sorted(run.rglob("*"))
        if p.is_file() and p.name != MANIFEST
    }


def _load_manifest(run: Path) -> dict:
    path = run / MANIFEST
    if not path.exists():
        raise RunIOError(f"{run} is not a run directory (no {MANIFEST})")
    return _read_json(path)


def _save_manifest(run: Path, manifest: dict) -> None:
    manifest["outputs"] = _inventory(run)
    _write_json(run / MANIFEST, manifest)


def _coef_csv(path: Path, names, beta) -> None:
    lines = ["name,estimate"] + [f"{n},{float(b)!r}" for n, b in zip(names, beta)]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


# ---------------------------------------------------------------------------
# configuration

def resolve_config(doc: dict, flags: dict | None = None) -> dict:
    """Validate a config document and return its fully resolved form."""
    flags = {k: v for k, v in (flags or {}).items() if v is not None}
    if not isinstance(doc, dict):
        raise ValidationError("config must be a JSON object", "config")
    allowed = {"preset", "scenario", "fit", "seed", "replications"}
    unknown = set(doc) - allowed
    if unknown:
        raise ValidationError(f"unknown key(s) {sorted(unknown)}", "config")
    name = flags.pop("preset", None) or doc.get("preset", "scenario1")
    scen = doc.get("scenario", {})
    if not isinstance(scen, dict):
        raise ValidationError("must be an object", "scenario")
    scen = dict(scen)
    for key in ("seed", "replications"):
        if key in doc:
            scen[key] = doc[key]
    for key in ("seed", "replications", "n", "r_squared"):
        if key in flags:
            scen[key] = flags.pop(key)
    try:
        cfg = preset(name, **scen)
    except ValidationError as exc:
        field = f"scenario.{exc.field}" if exc.field and exc.field not in ("scenario", "preset") else exc.field
        raise ValidationError(str(exc).split(": ", 1)[-1], field) from None
    except TypeError as exc:
        raise ValidationError(str(exc), "scenario") from None
    fit = _fit_settings(doc.get("fit", {}), flags)
    return {"preset": name, "scenario": cfg.to_dict(), "fit": fit.to_dict()}


def _fit_settings(base: dict, flags: dict) -> FitSettings:
    if not isinstance(base, dict):
        raise ValidationError("must be an object", "fit")
    merged = {**base, **{k: v for k, v in flags.items() if k in FitSettings.__dataclass_fields__}}
    try:
        return FitSettings.from_dict(merged)
    except ValidationError as exc:
        field = exc.field if (exc.field or "").startswith("fit") else f"fit.{exc.field}"
        raise ValidationError(str(exc).split(": ", 1)[-1], field) from None
    except TypeError as exc:
        raise ValidationError(str(exc), "fit") from None


def _fit_flags(args) -> dict:
    out = {
        "b": args.b, "bandwidth": args.bandwidth, "lam": args.lam, "folds": args.folds,
        "dist": args.dist, "s": args.s, "imputer": args.imputer, "fallback": args.fallback,
    }
    if out["s"] is not None and out["s"] not in ("sqrt", "log"):
        try:
            out["s"] = float(out["s"])
        except ValueError:
            raise ValidationError(f"expected a number, 'sqrt' or 'log', got {out['s']!r}", "s") from None
    return {k: v for k, v in out.items() if v is not None}


# ---------------------------------------------------------------------------
# commands

def simulate(resolved: dict, out: Path) -> dict:
    """Generate every replication described by ``resolved`` into ``out``."""
    cfg = ScenarioConfig.from_dict(resolved["scenario"])
    out.mkdir(parents=True, exist_ok=True)
    data = out / "datasets"
    data.mkdir(exist_ok=True)
    timings = []
    for r in range(cfg.replications):
        t0 = time.perf_counter()
        ds, truth = gen_scenario(cfg, r)
        write_csv(ds, data / f"rep_{r:03d}.csv")
        _write_json(data / f"rep_{r:03d}.truth.json", truth.to_dict())
        timings.append(time.perf_counter() - t0)
    manifest = {
        "software": {"name": "primeimpute", "version": __version__},
        "config": resolved,
        "config_hash": hashlib.sha256(json.dumps(resolved, sort_keys=True).encode()).hexdigest(),
        "seed": cfg.seed,
        "steps": [{"command": "simulate"}],
        "timing": {"simulate": timings},
    }
    _save_manifest(out, manifest)
    return manifest


def _fit_one(args):
    path, truth_path, method, settings, seed = args
    ds = load_csv(path)
    truth = Truth.from_dict(_read_json(truth_path))
    t0 = time.perf_counter()
    beta, info = fit_method(method, ds, settings, seed, x_full=truth.x_full)
    return beta, info, ds.columns, time.perf_counter() - t0


def fit_run(run: Path, method: str, settings: FitSettings, jobs: int = 1) -> None:
    """Fit ``method`` on every replication of a run directory."""
    manifest = _load_manifest(run)
    seed = int(manifest["seed"])
    datasets = sorted((run / "datasets").glob("rep_*.csv"))
    if not datasets:
        raise RunIOError(f"no datasets in {run / 'datasets'}")
    work = []
    for path in datasets:
        r = int(path.stem.split("_")[1])
        work.append((path, path.with_suffix(".truth.json"), method, settings, replication_seed(seed, r)))
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_fit_one, work))
    else:
        results = [_fit_one(w) for w in work]

    dest = run / "fits" / method
    dest.mkdir(parents=True, exist_ok=True)
    timings = []
    for (path, *_), (beta, info, cols, dt) in zip(work, results):
        r = int(path.stem.split("_")[1])
        _write_json(dest / f"rep_{r:03d}.json", {
            "method": method, "replication": r, "beta": beta.tolist(),
            "coefficients": dict(zip(cols, beta.tolist())), "diagnostics": _jsonable(info),
        })
        _coef_csv(dest / f"rep_{r:03d}.csv", cols, beta)
        timings.append(dt)
    manifest["steps"].append({"command": "fit", "method": method, "settings": settings.to_dict(), "jobs": jobs})
    manifest.setdefault("timing", {})[f"fit:{method}"] = timings
    _save_manifest(run, manifest)


def fit_file(path: Path, method: str, settings: FitSettings, seed: int, out: Path,
             na_token: str = "NA", response: str = "y") -> np.ndarray:
    """Fit ``method`` on one CSV and write coefficients and diagnostics to ``out``."""
    ds = load_csv(path, response=response, na_token=na_token)
    t0 = time.perf_counter()
    beta, info = fit_method(method, ds, settings, seed)
    dt = time.perf_counter() - t0
    out.mkdir(parents=True, exist_ok=True)
    _coef_csv(out / "coefficients.csv", ds.columns, beta)
    _write_json(out / "coefficients.json", {
        "method": method, "seed": seed, "beta": beta.tolist(),
        "coefficients": dict(zip(ds.columns, beta.tolist())),
    })
    _write_json(out / "diagnostics.json", _jsonable(info))
    manifest = {
        "software": {"name": "primeimpute", "version": __version__},
        "seed": seed,
        "steps": [{
            "command": "fit", "dataset": str(Path(path).resolve()), "dataset_sha256": _sha256(path),
            "method": method, "settings": settings.to_dict(), "seed": seed,
            "na_token": na_token, "response": response,
        }],
        "timing": {f"fit:{method}": [dt]},
    }
    _save_manifest(out, manifest)
    return beta


def evaluate_run(run: Path):
    manifest = _load_manifest(run)
    truths = sorted((run / "datasets").glob("rep_*.truth.json"))
    if not truths:
        raise RunIOError(f"no truth sidecars in {run / 'datasets'}")
    beta0 = np.asarray(_read_json(truths[0])["beta0"], dtype=float)
    fits = run / "fits"
    methods = sorted(p.name for p in fits.iterdir() if p.is_dir()) if fits.exists() else []
    if not methods:
        raise RunIOError(f"no fits in {fits}")
    by_method = {}
    for m in methods:
        recs = []
        for f in sorted((fits / m).glob("rep_*.json")):
            d = _read_json(f)
            recs.append(ReplicationRecord(m, int(d["replication"]), np.asarray(d["beta"])))
        by_method[m] = recs
    beta_full = None
    if "full" in by_method:
        beta_full = np.vstack([r.beta_hat for r in sorted(by_method["full"], key=lambda r: r.replication)])
    report = evaluate(by_method, beta0, beta_full=beta_full)
    report.write(run / "metrics")
    manifest["steps"].append({"command": "evaluate"})
    _save_manifest(run, manifest)
    return report


def reproduce(manifest_path: Path, out: Path | None = None) -> tuple[bool, list[str]]:
    """Replay every recorded step into ``out`` and compare output hashes."""
    manifest_path = Path(manifest_path)
    if manifest_path.is_dir():
        manifest_path = manifest_path / MANIFEST
    manifest = _read_json(manifest_path)
    src = manifest_path.parent
    out = Path(out) if out is not None else src.with_name(src.name + "-replay")
    if out.resolve() == src.resolve():
        raise ValidationError("replay directory must differ from the recorded run", "out")
    if out.exists() and any(out.iterdir()):
        raise RunIOError(f"replay directory {out} is not empty")
    for step in manifest["steps"]:
        cmd = step["command"]
        settings = FitSettings.from_dict(step.get("settings"))
        if cmd == "simulate":
            simulate(manifest["config"], out)
        elif cmd == "fit" and "dataset" in step:
            if _sha256(step["dataset"]) != step["dataset_sha256"]:
                raise ValidationError(f"input dataset {step['dataset']} changed since the recorded run")
            fit_file(Path(step["dataset"]), step["method"], settings, int(step["seed"]), out,
                     step.get("na_token", "NA"), step.get("response", "y"))
        elif cmd == "fit":
            fit_run(out, step["method"], settings, int(step.get("jobs", 1)))
        elif cmd == "evaluate":
            evaluate_run(out)
        else:
            raise ValidationError(f"unknown step {cmd!r} in manifest")
    fresh = _inventory(out)
    recorded = manifest.get("outputs", {})
    diff = sorted(k for k in set(fresh) | set(recorded) if fresh.get(k) != recorded.get(k))
    return not diff, diff


# ---------------------------------------------------------------------------
# argument parsing

def _add_fit_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("estimator settings")
    g.add_argument("--b", type=int, help="number of random projection directions (default 100)")
    g.add_argument("--bandwidth", type=float, help="fixed kernel bandwidth (default n^(-1/3))")
    g.add_argument("--lambda", dest="lam", type=float, help="fixed L1 penalty (default: cross-validated)")
    g.add_argument("--folds", type=int, help="cross-validation folds (default 10)")
    g.add_argument("--dist", choices=("gaussian", "uniform", "sparse"), help="direction entry law")
    g.add_argument("--s", help="sparse-projection parameter: a number >= 1, 'sqrt' or 'log'")
    g.add_argument("--imputer", choices=("prime", "plain"), help="projected or plain multivariate kernel")
    g.add_argument("--fallback", choices=("relaxed", "strict"), help="policy for cells without donors")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="primeimpute", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate replication datasets")
    p.add_argument("--config", type=Path, help="JSON config (preset name plus overrides)")
    p.add_argument("--preset", choices=("scenario1", "scenario2", "scenario3"))
    p.add_argument("--out", type=Path, required=True, help="run directory to create")
    p.add_argument("--seed", type=int)
    p.add_argument("--replications", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--r-squared", dest="r_squared", type=float)
    _add_fit_flags(p)

    p = sub.add_parser("fit", help="fit a method on a CSV file or on every dataset of a run")
    p.add_argument("target", type=Path, help="CSV file or run directory")
    p.add_argument("--method", required=True, choices=METHODS)
    p.add_argument("--out", type=Path, help="output directory (CSV targets only)")
    p.add_argument("--seed", type=int, help="seed for a CSV target (run seeds come from the manifest)")
    p.add_argument("--na-token", default="NA")
    p.add_argument("--response", default="y")
    p.add_argument("--jobs", type=int, default=1)
    _add_fit_flags(p)

    p = sub.add_parser("evaluate", help="compute metrics for every fitted method of a run")
    p.add_argument("run", type=Path)

    p = sub.add_parser("reproduce", help="replay a manifest and verify outputs are identical")
    p.add_argument("manifest", type=Path, help="manifest.json or its run directory")
    p.add_argument("--out", type=Path, help="replay directory (default RUN-replay)")
    return parser


def _run(args) -> int:
    if args.command == "simulate":
        doc = _read_json(args.config) if args.config else {}
        flags = {"preset": args.preset, "seed": args.seed, "replications": args.replications,
                 "n": args.n, "r_squared": args.r_squared, **_fit_flags(args)}
        resolved = resolve_config(doc, flags)
        if args.out.exists() and any(args.out.iterdir()):
            raise RunIOError(f"output directory {args.out} is not empty")
        manifest = simulate(resolved, args.out)
        print(f"wrote {manifest['config']['scenario']['replications']} replications to {args.out}")
        return EXIT_OK

    if args.command == "fit":
        target = args.target
        if target.is_dir():
            if args.seed is not None:
                raise ValidationError("run seeds are fixed by the manifest", "seed")
            manifest = _load_manifest(target)
            settings = _fit_settings(manifest["config"].get("fit", {}), _fit_flags(args))
            fit_run(target, args.method, settings, args.jobs)
            print(f"fitted {args.method} on {target}")
            return EXIT_OK
        if not target.exists():
            raise RunIOError(f"no such file: {target}")
        if args.out is None:
            raise ValidationError("required for a CSV target", "out")
        settings = _fit_settings({}, _fit_flags(args))
        beta = fit_file(target, args.method, settings, 0 if args.seed is None else args.seed,
                        args.out, args.na_token, args.response)
        print(" ".join(f"{b:.6g}" for b in beta))
        return EXIT_OK

    if args.command == "evaluate":
        report = evaluate_run(args.run)
        for name, m in report.methods.items():
            rate = "" if m.optimal_rate is None else f"  optimal-rate {m.optimal_rate:.3f}"
            print(f"{name:>7}: MSE {m.mse:.5g} (var {m.variance:.5g}, bias^2 {m.bias_sq:.5g}){rate}")
        return EXIT_OK

    ok, diff = reproduce(args.manifest, args.out)
    if ok:
        print("replay identical")
        return EXIT_OK
    for k in diff:
        print(f"differs: {k}", file=sys.stderr)
    return EXIT_MISMATCH


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _run(args)
    except PrimeError as exc:
        print(f"error [{exc.code}]: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error [io]: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
