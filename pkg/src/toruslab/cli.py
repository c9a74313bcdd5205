"""Command-line entry point: ``toruslab <command> [options]``.

Exit codes: 0 every executed suite passed, 1 a suite failed, 2 configuration error.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import orbit_lab as ol
from . import singular as sg
from .suites import EXPERIMENTS, SUITES
from .torus_core import DomainError
from .torus_maps import ConstructionParams, build_maps, describe, validate_params

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


class ConfigError(Exception):
    pass


# ---------------------------------------------------------------------------
# configuration


def load_config(args) -> dict:
    cfg = {}
    if args.config:
        try:
            cfg = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(cfg, dict):
            raise ConfigError("config must be a JSON object")
    params = dict(cfg.get("params", {}))
    if args.n is not None:
        params["n"] = args.n
    if args.kappa is not None:
        params["kappa"] = args.kappa
    try:
        P = ConstructionParams.from_dict(params).resolved()
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad params: {exc}") from exc
    seed = args.seed
    if seed is None and os.environ.get("TORUSLAB_SEED"):
        try:
            seed = int(os.environ["TORUSLAB_SEED"])
        except ValueError as exc:
            raise ConfigError("TORUSLAB_SEED must be an integer") from exc
    if seed is None:
        seed = int(cfg.get("seed", 0))
    options = dict(cfg.get("options", {}))
    return {"params": P, "seed": seed, "tasks": max(1, args.tasks or cfg.get("tasks", 1)),
            "out": Path(args.out or cfg.get("out", "toruslab-out")), "format": args.format or cfg.get("format", "json"),
            "options": options}


def require_valid(P: ConstructionParams) -> None:
    rep = validate_params(P)
    if not rep.ok:
        names = ", ".join(c.name for c in rep.failures())
        raise ConfigError(f"parameter validation failed: {names}")


def resolved_config(run: dict, extra: dict | None = None) -> dict:
    return {"params": run["params"].to_dict(), "seed": run["seed"], "tasks": run["tasks"],
            "format": run["format"], "options": {**run["options"], **(extra or {})}}


# ---------------------------------------------------------------------------
# reports


def _jsonable(o):
    if isinstance(o, dict):
        return {str(k): _jsonable(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_jsonable(v) for v in o]
    if isinstance(o, np.ndarray):
        return _jsonable(o.tolist())
    if isinstance(o, (np.bool_, bool)):
        return bool(o)
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, (np.floating, float)):
        v = float(o)
        return v if np.isfinite(v) else str(v)
    return o


def _split_timing(o, path="", out=None):
    """Move every "seconds" entry out of the result so reruns are byte-identical."""
    out = {} if out is None else out
    if isinstance(o, dict):
        res = {}
        for k, v in o.items():
            if k == "seconds":
                out[path or "."] = v
            else:
                res[k] = _split_timing(v, f"{path}/{k}", out)[0]
        return res, out
    if isinstance(o, list):
        return [_split_timing(v, f"{path}/{i}", out)[0] for i, v in enumerate(o)], out
    return o, out


def write_report(run: dict, name: str, result: dict, extra: dict | None = None) -> Path:
    out = run["out"]
    out.mkdir(parents=True, exist_ok=True)
    body, timing = _split_timing(_jsonable(result))
    stamp = {"generated_at": _dt.datetime.now(_dt.timezone.utc).isoformat(), "seconds": timing}
    if run["format"] == "csv":
        path = out / f"{name}.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["key", "value"])
            for k, v in _flatten(body):
                w.writerow([k, v])
        (out / f"{name}.config.json").write_text(json.dumps(resolved_config(run, extra), indent=2, sort_keys=True))
    else:
        path = out / f"{name}.json"
        doc = {"report": name, "pass": body.get("pass"), "config": resolved_config(run, extra), "result": body}
        path.write_text(json.dumps(doc, indent=2, sort_keys=True))
    (out / f"{name}.timestamp.json").write_text(json.dumps(stamp, indent=2, sort_keys=True))
    return path


def _flatten(o, prefix=""):
    if isinstance(o, dict):
        for k, v in o.items():
            yield from _flatten(v, f"{prefix}.{k}" if prefix else str(k))
    elif isinstance(o, list) and o and isinstance(o[0], (dict, list)):
        for i, v in enumerate(o):
            yield from _flatten(v, f"{prefix}[{i}]")
    else:
        yield prefix, json.dumps(o)


def say(line: str) -> None:
    print(line, flush=True)


# ---------------------------------------------------------------------------
# commands


def cmd_params_validate(run, args) -> int:
    rep = validate_params(run["params"])
    write_report(run, "params-validate", rep.to_dict())
    for c in rep.checks:
        say(f"{'PASS' if c.passed else 'FAIL'}  {c.name}  (margin {c.margin:.4g})")
    for c in rep.info:
        say(f"INFO  {c.name}: {c.detail}")
    return EXIT_OK if rep.ok else EXIT_CONFIG


def cmd_verify(run, args) -> int:
    require_valid(run["params"])
    names = args.suites or list(SUITES)
    unknown = [s for s in names if s not in SUITES]
    if unknown:
        raise ConfigError(f"unknown suite(s): {', '.join(unknown)}; choose from {', '.join(SUITES)}")
    kw = {"seed": run["seed"], "tasks": 1, **run["options"]}

    def job(name):
        return name, SUITES[name](run["params"], **kw)

    if run["tasks"] > 1:
        with ThreadPoolExecutor(run["tasks"]) as ex:
            results = list(ex.map(job, names))
    else:
        results = [job(s) for s in names]
    ok = True
    for name, res in results:
        path = write_report(run, f"verify-{name}", res)
        say(f"{'PASS' if res['pass'] else 'FAIL'}  {name}  -> {path}")
        ok &= bool(res["pass"])
    return EXIT_OK if ok else EXIT_FAIL


def cmd_experiment(run, args) -> int:
    require_valid(run["params"])
    opts = {k: v for k, v in vars(args).items()
            if k in ("steps", "grid", "seeds", "count", "size", "arcs", "min_length", "max_steps", "max_iter",
                     "pairs", "side") and v is not None}
    if getattr(args, "map", None):
        opts["map_name"] = args.map
    res = EXPERIMENTS[args.name](run["params"], seed=run["seed"], tasks=run["tasks"], **{**run["options"], **opts})
    path = write_report(run, f"experiment-{args.name}", res, opts)
    say(f"{'PASS' if res['pass'] else 'FAIL'}  experiment {args.name}  -> {path}")
    if args.name == "density":
        for r in res["F"]:
            say(f"  F seed point {np.round(r['seed_point'], 4).tolist()}: fraction {r['fraction']:.4f}")
        say(f"  control A: fraction {res['control_A']['fraction']:.4f}")
    return EXIT_OK if res["pass"] else EXIT_FAIL


def cmd_export(run, args) -> int:
    require_valid(run["params"])
    path = write_report(run, "map-description", {"pass": True, **describe(run["params"])})
    say(f"wrote {path}")
    return EXIT_OK


def _parse_box(text: str, n: int):
    try:
        lo, hi = text.split(":")
        lo = np.array([float(v) for v in lo.split(",")])
        hi = np.array([float(v) for v in hi.split(",")])
    except ValueError as exc:
        raise ConfigError(f"box must look like 'lo1,...,lon:hi1,...,hin', got {text!r}") from exc
    if lo.size != n or hi.size != n:
        raise ConfigError(f"box needs {n} coordinates per corner")
    return lo, hi


def _parse_point(text: str, n: int):
    try:
        x = np.array([float(v) for v in text.split(",")])
    except ValueError as exc:
        raise ConfigError(f"bad point {text!r}") from exc
    if x.size != n:
        raise ConfigError(f"point needs {n} coordinates")
    return x


def cmd_critical(run, args) -> int:
    P = run["params"]
    require_valid(P)
    F = build_maps(P)["F"]
    out = run["out"]
    out.mkdir(parents=True, exist_ok=True)
    if args.action == "sample":
        if args.region:
            regions = [_parse_box(args.region, P.n)]
        else:
            regions = [("segment", P.q2(), P.q1())] + sg.annulus_segments(P, 20, run["seed"])
        ws = [w for reg in regions for w in sg.critical_locus_sample(F, reg, args.resolution)]
        sg.write_witnesses_csv(ws, out / "critical-witnesses.csv")
        res = {"pass": bool(ws) and all(w.ok for w in ws), "count": len(ws), "witnesses": [w.to_dict() for w in ws]}
        path = write_report(run, "critical-sample", res, {"region": args.region, "resolution": args.resolution})
        say(f"{len(ws)} witnesses -> {out / 'critical-witnesses.csv'}, {path}")
    else:
        res = sg.persistence_harness(P, args.count, args.size, run["seed"], run["tasks"])
        sg.write_witnesses_csv(res["witnesses"], out / "persistence-witnesses.csv")
        res["witnesses"] = [w.to_dict() for w in res["witnesses"]]
        path = write_report(run, "critical-persist", res, {"count": args.count, "size": args.size})
        say(f"{'PASS' if res['pass'] else 'FAIL'}  {args.count} perturbations, "
            f"{len(res['failures'])} failures -> {path}")
    return EXIT_OK if res["pass"] else EXIT_FAIL


def cmd_orbit(run, args) -> int:
    P = run["params"]
    require_valid(P)
    m = build_maps(P)[args.map]
    out = run["out"]
    out.mkdir(parents=True, exist_ok=True)
    x0 = _parse_point(args.x0, P.n) if args.x0 else ol.random_start(P.n, run["seed"])
    if args.action == "run":
        pts = list(ol.iterate(m, x0, args.steps))
        path = out / f"orbit-{args.map}.csv"
        ol.write_orbit_csv(pts, path)
        say(f"{len(pts)} points -> {path}")
        return EXIT_OK
    if args.action == "density":
        grid = args.grid or (100 if P.n == 2 else 32)
        steps = args.steps
        rep, visited = ol.orbit_density(m, x0, steps, grid, return_visited=True)
        proj = visited.reshape(grid, -1, grid).any(axis=1) if P.n > 2 else visited
        ol.write_density_csv(proj.astype(np.int64), out / f"density-{args.map}.csv")
        ol.write_gnuplot_matrix(proj.astype(np.int64), out / f"density-{args.map}.dat")
        path = write_report(run, f"orbit-density-{args.map}", {"pass": True, **rep.to_dict()},
                            {"steps": steps, "grid": grid})
        say(f"fraction {rep.fraction:.4f} of {rep.total} boxes -> {path}")
        return EXIT_OK
    if not (args.u and args.v):
        raise ConfigError("orbit hit needs --u and --v boxes")
    U, V = _parse_box(args.u, P.n), _parse_box(args.v, P.n)
    res = ol.two_set_hitting(m, U, V, args.max_iter).to_dict()
    res["pass"] = res["hit"]
    path = write_report(run, f"orbit-hit-{args.map}", res, {"u": args.u, "v": args.v, "max_iter": args.max_iter})
    say(f"{'hit at ' + str(res['iterate']) if res['hit'] else 'no hit'} -> {path}")
    return EXIT_OK if res["hit"] else EXIT_FAIL


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with 'params', 'seed', 'tasks', 'options'")
    common.add_argument("--n", type=int, help="torus dimension")
    common.add_argument("--kappa", type=float, help="cone parameter")
    common.add_argument("--seed", type=int, help="seed (falls back to TORUSLAB_SEED, then config, then 0)")
    common.add_argument("--out", help="output directory (default toruslab-out)")
    common.add_argument("--tasks", type=int, help="maximum parallel tasks")
    common.add_argument("--format", choices=["json", "csv"], help="report format")

    p = argparse.ArgumentParser(prog="toruslab", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    pp = sub.add_parser("params", help="parameter chain").add_subparsers(dest="action", required=True)
    pp.add_parser("validate", parents=[common])

    v = sub.add_parser("verify", parents=[common], help="run invariant suites")
    v.add_argument("suites", nargs="*", metavar="suite", help=f"any of: {', '.join(SUITES)} (default all)")

    e = sub.add_parser("experiment", parents=[common], help="seeded experiments")
    e.add_argument("name", choices=list(EXPERIMENTS))
    e.add_argument("--steps", type=int)
    e.add_argument("--grid", type=int)
    e.add_argument("--seeds", type=int, help="number of orbits (density)")
    e.add_argument("--count", type=int)
    e.add_argument("--size", type=float)
    e.add_argument("--arcs", type=int)
    e.add_argument("--min-length", type=float)
    e.add_argument("--max-steps", type=int)
    e.add_argument("--max-iter", type=int)
    e.add_argument("--pairs", type=int)
    e.add_argument("--side", type=float)
    e.add_argument("--map", choices=["A", "f", "F"])

    x = sub.add_parser("export", help="exports").add_subparsers(dest="action", required=True)
    x.add_parser("map-description", parents=[common])

    c = sub.add_parser("critical", help="critical set").add_subparsers(dest="action", required=True)
    cs = c.add_parser("sample", parents=[common])
    cs.add_argument("--region", help="box 'lo1,...:hi1,...' (default: q2-q1 segment plus 20 shell segments)")
    cs.add_argument("--resolution", type=float, default=0.005)
    cp = c.add_parser("persist", parents=[common])
    cp.add_argument("--count", type=int, default=200)
    cp.add_argument("--size", type=float, default=0.5)

    o = sub.add_parser("orbit", help="orbits").add_subparsers(dest="action", required=True)
    for name in ("run", "density", "hit"):
        q = o.add_parser(name, parents=[common])
        q.add_argument("--map", choices=["A", "f", "F"], default="F")
        q.add_argument("--x0", help="start point 'x1,...,xn' (default: seeded uniform)")
        q.add_argument("--steps", type=int, default=1000 if name == "run" else 10 ** 6)
        if name == "density":
            q.add_argument("--grid", type=int)
        if name == "hit":
            q.add_argument("--u", help="box U 'lo:hi'")
            q.add_argument("--v", help="box V 'lo:hi'")
            q.add_argument("--max-iter", type=int, default=10_000)
    return p


HANDLERS = {
    "params": cmd_params_validate,
    "verify": cmd_verify,
    "experiment": cmd_experiment,
    "export": cmd_export,
    "critical": cmd_critical,
    "orbit": cmd_orbit,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        run = load_config(args)
        return HANDLERS[args.command](run, args)
    except (ConfigError, DomainError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
