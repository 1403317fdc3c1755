"""Batch front end: ``hydrosym <task> --config run.yaml --out DIR``.

The config is a YAML document validated against CONFIG_SCHEMA.  Exit
codes: 0 success, 1 a check failed, 2 the run could not be executed (an
``error.json`` document is written to the output directory).
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from pathlib import Path

import jsonschema
import numpy as np
import yaml
from threadpoolctl import threadpool_limits

from . import exprlang as el
from .core import SYSTEM_SCHEMA, HyperbolicityError, system_from_dict, validate_hyperbolic

TASKS = ("check", "symmetry", "series", "solve", "verify", "plot-data")

_exprs = {"type": "array", "items": {"type": "string"}}
_axis = {
    "type": "object",
    "properties": {"start": {"type": "number"}, "stop": {"type": "number"},
                   "num": {"type": "integer", "minimum": 3}},
    "required": ["start", "stop", "num"],
    "additionalProperties": False,
}
_spec = {
    "type": "object",
    "properties": {"f": _exprs, "c": _exprs, "d": _exprs},
    "required": ["c", "d"],
    "additionalProperties": False,
}

CONFIG_SCHEMA = {
    "type": "object",
    "properties": {
        "task": {"enum": list(TASKS)},
        "system": SYSTEM_SCHEMA,
        "seed": {"type": "integer"},
        "tol": {"type": "number", "exclusiveMinimum": 0},
        "samples": {
            "type": "object",
            "properties": {
                "count": {"type": "integer", "minimum": 1},
                "box": {"type": "array", "items": {"type": "array", "items": {"type": "number"},
                                                   "minItems": 2, "maxItems": 2}},
            },
            "required": ["box"],
            "additionalProperties": False,
        },
        "gauge": {"oneOf": [{"enum": ["auto", "base"]}, _exprs]},
        "w": _exprs,
        "series": {
            "type": "object",
            "properties": {"spec": _spec, "seed": {"enum": ["1", "v"]},
                           "N": {"type": "integer", "minimum": 0}},
            "required": ["spec", "seed", "N"],
            "additionalProperties": False,
        },
        "solve": {
            "type": "object",
            "properties": {
                "convention": {"enum": ["generalized", "classical"]},
                "x": _axis, "t": _axis,
                "guess": {"type": "array", "items": {"type": "number"}},
                "x0": {"type": "number"}, "t0": {"type": "number"},
                "newton_tol": {"type": "number", "exclusiveMinimum": 0},
                "pde_tol": {"type": "number", "exclusiveMinimum": 0},
            },
            "required": ["x", "t", "guess"],
            "additionalProperties": False,
        },
        "grid": {"type": "string"},
        "output": {
            "type": "object",
            "properties": {"csv": {"type": "string"}, "json": {"type": "string"},
                           "report": {"type": "string"}},
            "additionalProperties": False,
        },
    },
    "required": ["system"],
    "additionalProperties": False,
}

DEFAULT_SEED = 42
DEFAULT_TOL = 1e-10


class CheckFailed(Exception):
    pass


def load_config(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        cfg = yaml.safe_load(fh) or {}
    jsonschema.validate(cfg, CONFIG_SCHEMA)
    return cfg


def write_atomic(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def sample_points(sys, cfg: dict, seed: int) -> list:
    """Uniform points in the configured box (numpy default_rng(seed)), hyperbolic ones only."""
    spec = cfg.get("samples")
    if spec is None:
        raise ValueError("this task needs a 'samples' box")
    box = np.asarray(spec["box"], dtype=float)
    if box.shape != (sys.n, 2):
        raise ValueError(f"samples.box needs {sys.n} [lo, hi] pairs")
    count = spec.get("count", 50)
    rng = np.random.default_rng(seed)
    pts = []
    for _ in range(100 * count):
        u = rng.uniform(box[:, 0], box[:, 1])
        p = sys.point(u)
        if validate_hyperbolic(sys, p).passed:
            pts.append(p)
            if len(pts) == count:
                break
    return pts


def _connection(sys, cfg):
    from .geometry import Connection
    return Connection(sys, cfg.get("gauge", "auto"))


def _spec(sys, d: dict):
    from .symmetry import RecursionSpecFirst, RecursionSpecSecond
    if "f" in d:
        return RecursionSpecSecond(d["f"], d["c"], d["d"])
    return RecursionSpecFirst(d["c"], d["d"])


def _parse_list(sys, items):
    names = set(sys.coords) | {a.name for a in sys.aux}
    return [el.parse(s, names) for s in items]


def task_check(sys, cfg, args, out):
    from .geometry import curvature_check, tsarev_residual
    tol = args.tol
    pts = sample_points(sys, cfg, args.seed)
    conn = _connection(sys, cfg)
    table = []
    for p in pts:
        table.append({"u": [float(p[c]) for c in sys.coords],
                      "tsarev": tsarev_residual(sys, p, conn),
                      "curvature": curvature_check(sys, p, conn).closed})
    worst = max((r["tsarev"] for r in table), default=0.0)
    worst_closed = max((r["curvature"] for r in table), default=0.0)
    return {"task": "check", "samples": len(pts), "tsarev_residual": worst,
            "curvature_residual": worst_closed, "tol": tol, "passed": worst < tol,
            "points": table}


def task_symmetry(sys, cfg, args, out):
    from .symmetry import symmetry_residual
    pts = sample_points(sys, cfg, args.seed)
    conn = _connection(sys, cfg)
    vectors = {"unit": sys.unit(), "velocity": sys.velocity()}
    if "w" in cfg:
        vectors["w"] = sys.coefficients(_parse_list(sys, cfg["w"]))
    res = {k: symmetry_residual(sys, v, pts, conn) for k, v in vectors.items()}
    return {"task": "symmetry", "samples": len(pts), "residuals": res, "tol": args.tol,
            "passed": all(r < args.tol for r in res.values())}


def _series(sys, cfg, args, pts=None):
    from .hodograph import series_coefficients
    s = cfg["series"]
    conn = _connection(sys, cfg)
    w = series_coefficients(sys, _spec(sys, s["spec"]), s["seed"], s["N"], conn, pts)
    return w, conn


def task_series(sys, cfg, args, out):
    pts = sample_points(sys, cfg, args.seed)
    w, _ = _series(sys, cfg, args, pts)
    values = [[float(v) for v in w.evaluate(p)] for p in pts[:5]]
    return {"task": "series", "N": cfg["series"]["N"], "seed_vector": cfg["series"]["seed"],
            "symmetry_residual": w.certificate, "tol": args.tol,
            "sample_values": values, "passed": w.certificate < args.tol}


def _axis(a):
    return np.linspace(a["start"], a["stop"], a["num"])


def _solve(sys, cfg, args):
    from .hodograph import build_implicit, solve_grid
    s = cfg.get("solve")
    if s is None:
        raise ValueError("this task needs a 'solve' section")
    if "w" in cfg:
        w = sys.coefficients(_parse_list(sys, cfg["w"]))
    elif "series" in cfg:
        w, _ = _series(sys, cfg, args)
    else:
        raise ValueError("solve needs 'w' or 'series'")
    imp = build_implicit(sys, w, s.get("convention", "generalized"))
    grid = solve_grid(imp, _axis(s["x"]), _axis(s["t"]), s["guess"], s.get("x0"), s.get("t0"),
                      tol=s.get("newton_tol", 1e-12))
    return grid


def _verify(sys, grid, tol):
    from .hodograph import residual_pde
    rep = residual_pde(sys, grid)
    return {"max_residual": rep.max_residual, "location": list(rep.location),
            "per_component": rep.per_component, "nodes": rep.nodes, "tol": tol,
            "passed": rep.max_residual < tol}


def task_solve(sys, cfg, args, out):
    from .hodograph import grid_to_csv, grid_to_json
    grid = _solve(sys, cfg, args)
    outputs = cfg.get("output", {})
    write_atomic(out / outputs.get("csv", "solution.csv"), grid_to_csv(grid))
    pde_tol = cfg["solve"].get("pde_tol", 1e-4)
    verify = _verify(sys, grid, pde_tol)
    write_atomic(out / outputs.get("json", "solution.json"), grid_to_json(grid, {"verify": verify}))
    return {"task": "solve", "summary": grid.summary(), "verify": verify, "passed": verify["passed"]}


def task_verify(sys, cfg, args, out):
    from .hodograph import grid_from_csv
    if "grid" not in cfg:
        raise ValueError("verify needs 'grid' (path of a solution CSV)")
    path = Path(cfg["grid"])
    if not path.is_absolute():
        path = Path(args.config).parent / path
    grid = grid_from_csv(path.read_text(encoding="utf-8"))
    pde_tol = cfg.get("solve", {}).get("pde_tol", 1e-4)
    verify = _verify(sys, grid, pde_tol)
    return {"task": "verify", "verify": verify, "passed": verify["passed"]}


def task_plot_data(sys, cfg, args, out):
    """Long-format CSV (x, t, component, value) of a solved grid."""
    import csv
    import io
    from .hodograph import CONVERGED
    grid = _solve(sys, cfg, args)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["x", "t", "component", "value"])
    for i, c in enumerate(grid.coords):
        for k, tk in enumerate(grid.t):
            for j, xj in enumerate(grid.x):
                if grid.status[k, j] == CONVERGED:
                    w.writerow([repr(float(xj)), repr(float(tk)), c, repr(float(grid.u[i, k, j]))])
    name = cfg.get("output", {}).get("csv", "plot.csv")
    write_atomic(out / name, buf.getvalue())
    return {"task": "plot-data", "rows": buf.getvalue().count("\n") - 1, "passed": True}


HANDLERS = {"check": task_check, "symmetry": task_symmetry, "series": task_series,
            "solve": task_solve, "verify": task_verify, "plot-data": task_plot_data}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hydrosym", description=__doc__.splitlines()[0])
    p.add_argument("task", choices=TASKS)
    p.add_argument("--config", required=True, help="YAML run configuration")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--tol", type=float, default=None, help="check tolerance")
    p.add_argument("--seed", type=int, default=None, help="sampling seed (default 42)")
    p.add_argument("--threads", type=int, default=1, help="BLAS/OpenMP thread cap")
    return p


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out = Path(args.out)
    try:
        cfg = load_config(args.config)
        if cfg.get("task") not in (None, args.task):
            raise ValueError(f"config task {cfg['task']!r} differs from subcommand {args.task!r}")
        args.seed = args.seed if args.seed is not None else cfg.get("seed", DEFAULT_SEED)
        args.tol = args.tol if args.tol is not None else cfg.get("tol", DEFAULT_TOL)
        with threadpool_limits(limits=max(1, args.threads)):
            sys_ = system_from_dict(cfg["system"])
            report = HANDLERS[args.task](sys_, cfg, args, out)
    except (el.ExprSyntaxError, jsonschema.ValidationError, yaml.YAMLError, ValueError, KeyError,
            OSError, ArithmeticError, HyperbolicityError, RuntimeError, el.ExprError) as exc:
        doc = {"status": "error", "type": type(exc).__name__, "message": str(exc).splitlines()[0]}
        if isinstance(exc, el.ExprSyntaxError):
            doc["offset"] = exc.offset
        try:
            write_atomic(out / "error.json", json.dumps(doc, indent=1, sort_keys=True) + "\n")
        except OSError:
            pass
        print(json.dumps(doc, sort_keys=True), file=sys.stderr)
        return 2
    report["seed"] = args.seed
    text = json.dumps(report, indent=1, sort_keys=True, default=float) + "\n"
    name = cfg.get("output", {}).get("report", f"{args.task}_report.json")
    write_atomic(out / name, text)
    print(text, end="")
    return 0 if report.get("passed", True) else 1


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
