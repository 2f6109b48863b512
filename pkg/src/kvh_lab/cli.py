"""Command line front door: ``kvh-lab {run,check,oracle} --config PATH``.

Exit codes: 0 success, 1 configuration or input error, 2 a named check
failed, 3 numerical abort.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import _backend
from .errors import (
    BoundaryNotDecayed,
    ConfigError,
    CflViolation,
    DomainTooSmall,
    KvhLabError,
    NonFinite,
    SingularRegion,
    TooManyAborts,
)

EXIT_OK, EXIT_CONFIG, EXIT_CHECK, EXIT_ABORT = 0, 1, 2, 3
_INPUT_ERRORS = (ConfigError, CflViolation, DomainTooSmall, BoundaryNotDecayed)
_ABORTS = (NonFinite, SingularRegion, TooManyAborts)


def _fmt(x):
    return f"{float(x):.17g}"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else str(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _write_json(path, data):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_jsonable(data), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _load_config(args):
    from .config import load, validate

    cfg = load(args.config)
    if args.seed is not None:
        raw = dict(cfg.raw)
        raw["sampler"] = dict(raw.get("sampler", {}), seed=args.seed)
        cfg = validate(raw)
    return cfg


def _out_dir(args, cfg):
    d = Path(args.out_dir or cfg.get("output_dir") or ".")
    d.mkdir(parents=True, exist_ok=True)
    return d


def _threads(args):
    n = args.threads
    if n is None:
        env = os.environ.get(_backend.THREADS_ENV, "").strip()
        n = int(env) if env else 0
    if n < 0:
        raise ConfigError("--threads", "must be >= 0")
    _backend.set_threads(n)


# --- run -------------------------------------------------------------------

def _run_grid(ctx, out):
    from .diagnostics import relative_drift
    from .propagation import propagate_grid
    from .wavefunction import to_csv

    cfg = ctx.cfg
    final, series = propagate_grid(ctx.chi0, ctx.model, ctx.prop_config(),
                                   snapshot_steps=cfg.get("snapshot_steps", ()))
    ctx.run = (final, series)
    series.to_csv(out / "series.csv")
    snaps = []
    for step, chi in sorted(series.snapshots.items()):
        name = f"snapshot_{step:08d}.csv"
        to_csv(chi, out / name)
        snaps.append({"step": step, "t": step * cfg.dt, "file": name})
    last = series.records[-1]
    results = {
        "t_final": cfg.steps * cfg.dt,
        "norm_final": last.norm,
        "energy_final": last.energy,
        "norm_drift": relative_drift(series.column("norm")),
        "energy_drift": relative_drift(series.column("energy")),
        "records": len(series),
    }
    return results, snaps


def _run_characteristics(ctx, out):
    cfg = ctx.cfg
    res = ctx.qmc
    cols = ["t", "norm", "energy", "Lx", "Ly", "Lz",
            "err_norm", "err_energy", "err_Lx", "err_Ly", "err_Lz"]
    nan3 = np.full((len(res.times), 3), np.nan)

    def lcols(d):
        if "angular_L" not in d:
            return nan3
        v = d["angular_L"]
        if v.shape[1] == 1:       # n = 2: only the third component exists
            w = nan3.copy()
            w[:, 2] = v[:, 0]
            return w
        return v

    lv, le = lcols(res.values), lcols(res.errors)
    with open(out / "series.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for i, t in enumerate(res.times):
            row = [t, res.values["identity"][i, 0], res.values["energy"][i, 0], *lv[i],
                   res.errors["identity"][i, 0], res.errors["energy"][i, 0], *le[i]]
            w.writerow([_fmt(v) for v in row])
    e = res.values["energy"][:, 0]
    results = {
        "t_final": cfg.steps * cfg.dt,
        "samples": res.samples,
        "aborted_samples": res.aborted,
        "norm_final": res.values["identity"][-1, 0],
        "energy_initial": e[0],
        "energy_max_deviation": float(np.max(np.abs(e - e[0]))),
        "L_initial": lv[0],
        "L_max_deviation": np.max(np.abs(lv - lv[0]), axis=0),
        "max_imag_part": max(float(np.max(np.abs(v))) for v in res.imag.values()),
    }
    return results, []


def _validate_check_names(cfg, names):
    from .checks import DEFAULT_TOLERANCES, KNOWN_CHECKS

    unknown = [c for c in names if c not in KNOWN_CHECKS]
    if unknown:
        raise ConfigError("checks", f"unknown check(s) {', '.join(unknown)}; "
                          f"known: {', '.join(KNOWN_CHECKS)}")
    bad_tol = [k for k in (cfg.get("tolerances") or {}) if k not in DEFAULT_TOLERANCES]
    if bad_tol:
        raise ConfigError("tolerances", f"unknown tolerance name(s) {', '.join(bad_tol)}; "
                          f"known: {', '.join(DEFAULT_TOLERANCES)}")


def _require_steps(cfg):
    if cfg.steps < 1:
        raise ConfigError("steps", "must be >= 1 for run and check (0 is allowed for oracle)")


def _summary(cmd, cfg, **extra):
    return {"command": cmd, "scenario": cfg.scenario, "n": cfg.n,
            "representation": cfg.representation, "formalism": cfg.formalism,
            "seed": cfg.seed, "backend": _backend.resolve_backend(), "config": cfg.raw, **extra}


def _report_checks(checks):
    failed = [c["name"] for c in checks if not c["pass"]]
    for c in checks:
        flag = "PASS" if c["pass"] else "FAIL"
        print(f"{flag} {c['name']}: {c['value']:.3e} {c['comparison']} {c['tolerance']:.3e}")
    if failed:
        print(f"failed checks: {', '.join(failed)}", file=sys.stderr)
    return failed


def cmd_run(args):
    from .checks import CheckContext, run_checks

    cfg = _load_config(args)
    _require_steps(cfg)
    names = list(cfg.get("checks") or [])
    _validate_check_names(cfg, names)
    out = _out_dir(args, cfg)
    ctx = CheckContext(cfg)
    if cfg.representation == "grid":
        results, snaps = _run_grid(ctx, out)
    else:
        results, snaps = _run_characteristics(ctx, out)
    checks = run_checks(cfg, names, cfg.get("tolerances"), ctx) if names else []
    failed = _report_checks(checks)
    _write_json(out / "summary.json",
                _summary("run", cfg, results=results, snapshots=snaps, checks=checks,
                         passed=not failed))
    return EXIT_CHECK if failed else EXIT_OK


def cmd_check(args):
    from .checks import default_checks, run_checks

    cfg = _load_config(args)
    _require_steps(cfg)
    names = list(cfg.get("checks") or default_checks(cfg))
    _validate_check_names(cfg, names)
    out = _out_dir(args, cfg)
    checks = run_checks(cfg, names, cfg.get("tolerances"))
    failed = _report_checks(checks)
    _write_json(out / "summary.json",
                _summary("check", cfg, checks=checks, passed=not failed))
    return EXIT_CHECK if failed else EXIT_OK


# --- oracle ----------------------------------------------------------------

def read_points(path, n):
    """Read a CSV of phase-space points with header z1..z2n."""
    want = [f"z{i + 1}" for i in range(2 * n)]
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise ConfigError("--points", f"cannot read points file: {exc}") from None
    if not rows or [c.strip() for c in rows[0]] != want:
        raise ConfigError("--points", f"header must be {','.join(want)}")
    pts = []
    for i, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != 2 * n:
            raise ConfigError("--points", f"line {i}: expected {2 * n} columns, got {len(row)}")
        try:
            vals = [float(v) for v in row]
        except ValueError:
            raise ConfigError("--points", f"line {i}: non-numeric entry") from None
        if not all(np.isfinite(vals)):
            raise ConfigError("--points", f"line {i}: non-finite entry")
        pts.append(vals)
    if not pts:
        raise ConfigError("--points", "no points")
    return np.array(pts)


def cmd_oracle(args):
    from .propagation import propagate_characteristics

    cfg = _load_config(args)
    pts = read_points(args.points, cfg.n)
    out = _out_dir(args, cfg)
    t = cfg.steps * cfg.dt
    vals, st = propagate_characteristics(cfg.initial_state(), cfg.model(), t, cfg.dt, pts,
                                         cfg.hbar, cfg.get("flow_method", "leapfrog"))
    labels = st.status_labels()
    with open(out / "oracle.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"z{i + 1}" for i in range(2 * cfg.n)] + ["re", "im", "theta", "status"])
        for z, v, th, lab in zip(pts, vals, st.theta, labels):
            w.writerow([_fmt(x) for x in z] + [_fmt(v.real), _fmt(v.imag), _fmt(th), lab])
    print(f"oracle: {len(pts)} points, {st.aborted} singular_abort", file=sys.stderr)
    return EXIT_OK


# --- entry point -------------------------------------------------------------

def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="JSON run configuration")
    common.add_argument("--out-dir", help="output directory (default: config output_dir or .)")
    common.add_argument("--seed", type=int, help="sampler seed, overrides the config")
    common.add_argument("--threads", type=int,
                        help=f"worker threads, 0 = auto (env {_backend.THREADS_ENV})")
    p = argparse.ArgumentParser(prog="kvh-lab", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common], help="propagate and write series/summary")
    sub.add_parser("check", parents=[common], help="evaluate named invariant checks")
    o = sub.add_parser("oracle", parents=[common], help="characteristic solution at points")
    o.add_argument("--points", required=True, help="CSV with columns z1..z2n")
    return p


_COMMANDS = {"run": cmd_run, "check": cmd_check, "oracle": cmd_oracle}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.seed is not None and args.seed < 0:
            raise ConfigError("--seed", "must be a non-negative integer")
        _threads(args)
        return _COMMANDS[args.command](args)
    except _INPUT_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except _ABORTS as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return EXIT_ABORT
    except KvhLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
