"""``povar`` command line: simulate, estimate, sweep, bounds, klcheck.

Every command writes a JSON manifest next to its outputs. Exit status is 0
on success, 1 when a computation or check fails and 2 for bad input.
"""
from __future__ import annotations

import argparse
import csv
import datetime as _dt
import hashlib
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, dump_config, load_config
from .covariance import estimate_pair
from .errors import PovarError
from .estimator import dantzig_estimate, dense_estimate, row_support, tune_lambda
from .experiments import SweepSpec, error_metric, plot_sweep, run_sweep
from .linalg import max_norm
from .simulate import read_trajectories_csv, realization_streams, simulate, simulate_sampling, write_trajectories_csv
from .theory import bound_quantities, kl_bound_check

log = logging.getLogger("povar")

KL_SLACK = 1e-10


def git_blob_hash(data: bytes) -> str:
    """Content hash in git's blob format."""
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


class Manifest:
    def __init__(self, command: str, rc: RunConfig | None, inputs: list[Path]):
        self.data = {
            "tool": "povar",
            "version": __version__,
            "command": command,
            "seed": rc.model.seed if rc else None,
            "config": dump_config(rc) if rc else None,
            "inputs": {str(p): git_blob_hash(Path(p).read_bytes()) for p in inputs},
            "started": _now(),
            "finished": None,
            "outputs": [],
        }

    def add(self, path) -> Path:
        self.data["outputs"].append(str(path))
        return Path(path)

    def write(self, path) -> Path:
        self.data["finished"] = _now()
        Path(path).write_text(json.dumps(self.data, indent=2) + "\n")
        return Path(path)


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def _fmt(x) -> str:
    return repr(float(x)) if isinstance(x, (float, np.floating)) else str(x)


def _apply_overrides(rc: RunConfig, args) -> RunConfig:
    changes = {}
    if getattr(args, "seed", None) is not None:
        changes["seed"] = args.seed
    if getattr(args, "h0", None) is not None:
        changes["h0"] = args.h0
    if changes:
        rc.model = rc.model.with_(**changes)
    return rc


def _write_matrix(M: np.ndarray, path: Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        for row in M:
            w.writerow([_fmt(v) for v in row])


def _write_kv(items: dict, path: Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["key", "value"])
        for k, v in items.items():
            w.writerow([k, _fmt(v) if v is not None else ""])


def cmd_simulate(args) -> int:
    rc = _apply_overrides(load_config(args.config), args)
    out = Path(args.out or "trajectory.csv")
    man = Manifest("simulate", rc, [Path(args.config)])
    write_trajectories_csv(simulate(rc.model), man.add(out))
    man.write(out.with_name(out.name + ".manifest.json"))
    return 0


def cmd_estimate(args) -> int:
    rc = _apply_overrides(load_config(args.config), args)
    cfg = rc.model
    method = args.method or rc.estimate.get("method", "dense")
    lam = args.lam if args.lam is not None else (None if args.target_s is not None else rc.estimate.get("lambda"))
    target_s = args.target_s if args.target_s is not None else rc.estimate.get("target_s")
    inputs = [Path(args.config)]
    if args.trajectory:
        trajs = read_trajectories_csv(args.trajectory)
        inputs.append(Path(args.trajectory))
    else:
        trajs = simulate(cfg)
    out = Path(args.out or "estimate")
    out.mkdir(parents=True, exist_ok=True)
    man = Manifest("estimate", rc, inputs)
    g0, g1 = estimate_pair(trajs, cfg)
    summary = {}
    for est in (["dense", "dantzig"] if method == "both" else [method]):
        used_lam = None
        if est == "dense":
            th = dense_estimate(g0.gamma_hat, g1.gamma_hat)
        else:
            if lam is not None:
                rep = dantzig_estimate(g0.gamma_hat, g1.gamma_hat, lam)
                used_lam = lam
            else:
                used_lam, rep = tune_lambda(g0.gamma_hat, g1.gamma_hat,
                                            target_s if target_s is not None else cfg.theta.s)
            if not rep.ok:
                raise PovarError(f"Dantzig LP failed on some rows: {rep.lp_status}")
            th = rep.theta_hat
        _write_matrix(th, man.add(out / f"theta_hat_{est}.csv"))
        summary[f"{est}.lambda"] = used_lam
        summary[f"{est}.max_row_support"] = int(row_support(th).max())
        summary[f"{est}.error_linf_op"] = error_metric(th, cfg.theta)
        summary[f"{est}.error_max"] = max_norm(th - cfg.theta.entries)
    for k, v in summary.items():
        print(f"{k} = {_fmt(v) if v is not None else 'none'}")
    _write_kv(summary, man.add(out / "summary.csv"))
    man.write(out / "manifest.json")
    return 0


def cmd_sweep(args) -> int:
    rc = _apply_overrides(load_config(args.config), args)
    sw = rc.sweep
    if not sw:
        raise ConfigError(f"{args.config}: no [sweep] section")
    spec = SweepSpec(rc.model, sw["parameter"], sw["grid"], sw.get("replications", 5),
                     estimator=args.method or sw.get("estimator"), master_seed=rc.model.seed,
                     series_h0=tuple(sw.get("series_h0", (0, 1))),
                     fixed_theta=sw.get("fixed_theta", False))
    out = Path(args.out or "sweep")
    out.mkdir(parents=True, exist_ok=True)
    man = Manifest("sweep", rc, [Path(args.config)])
    res = run_sweep(spec, jobs=max(1, args.jobs))
    res.to_csv(man.add(out / "sweep.csv"))
    res.failures_to_csv(man.add(out / "failures.csv"))
    _write_kv({f"slope[{k}]": v[0] for k, v in res.slopes.items()}, man.add(out / "slopes.csv"))
    if args.plot:
        plot_sweep(res, man.add(out / f"panel_{res.panel}.svg"))
    man.write(out / "manifest.json")
    print(f"panel {res.panel}: {len(res.rows)} rows, {len(res.failures)} failed cells", file=sys.stderr)
    for k, (slope, _) in res.slopes.items():
        print(f"slope[{k}] = {slope:.4f}", file=sys.stderr)
    return 0


def cmd_bounds(args) -> int:
    rc = _apply_overrides(load_config(args.config), args)
    cfg = rc.model
    rep = bound_quantities(cfg.theta, cfg.Sigma, cfg.omega2, cfg.p, cfg.a, cfg.b,
                           cfg.T, cfg.D, cfg.theta.s, args.delta, N=cfg.N)
    items = rep.as_dict()
    for k, v in items.items():
        print(f"{k} = {_fmt(v)}")
    for w in rep.warnings:
        log.warning(w)
    if args.out:
        man = Manifest("bounds", rc, [Path(args.config)])
        _write_kv(items, man.add(Path(args.out)))
        man.write(Path(args.out).with_name(Path(args.out).name + ".manifest.json"))
    return 0


def cmd_klcheck(args) -> int:
    rc = _apply_overrides(load_config(args.config), args)
    cfg = rc.model
    _, rp, _ = realization_streams(cfg.seed, 0)
    mask = simulate_sampling(cfg, rp)
    exact, bound = kl_bound_check(cfg.theta, cfg.Sigma, cfg.omega2, mask)
    ok = exact <= bound + KL_SLACK
    print(f"exact_kl = {exact!r}")
    print(f"bound = {bound!r}")
    print(f"exact ≤ bound: {'PASS' if ok else 'FAIL'}")
    if args.out:
        man = Manifest("klcheck", rc, [Path(args.config)])
        _write_kv({"exact_kl": exact, "bound": bound, "pass": ok}, man.add(Path(args.out)))
        man.write(Path(args.out).with_name(Path(args.out).name + ".manifest.json"))
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="povar", description="Partially observed sparse VAR(1) toolkit")
    ap.add_argument("--version", action="version", version=f"povar {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="INI configuration file")
        p.add_argument("--out", help="output file or directory")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--h0", type=int, choices=(0, 1), help="override the lag h0")
        return p

    common(sub.add_parser("simulate", help="write a trajectory CSV")).set_defaults(func=cmd_simulate)

    p = common(sub.add_parser("estimate", help="estimate theta from a trajectory"))
    p.add_argument("--trajectory", help="trajectory CSV (default: simulate from the config)")
    p.add_argument("--method", choices=("dense", "dantzig", "both"))
    g = p.add_mutually_exclusive_group()
    g.add_argument("--lambda", dest="lam", type=float, help="Dantzig tube radius")
    g.add_argument("--target-s", dest="target_s", type=int, help="tune lambda to this row sparsity")
    p.set_defaults(func=cmd_estimate)

    p = common(sub.add_parser("sweep", help="run a parameter sweep"))
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--plot", action="store_true", help="also write an SVG plot")
    p.add_argument("--method", choices=("dense", "dantzig", "both"))
    p.set_defaults(func=cmd_sweep)

    p = common(sub.add_parser("bounds", help="print the error-bound quantities"))
    p.add_argument("--delta", type=float, default=0.05)
    p.set_defaults(func=cmd_bounds)

    common(sub.add_parser("klcheck", help="compare the exact KL with its bound")).set_defaults(func=cmd_klcheck)
    return ap


def main(argv=None) -> int:
    level = os.environ.get("POVAR_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except PovarError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
