"""Command-line front end: ``gen-data``, ``solve`` and ``bench``."""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import statistics
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import fields

import numpy as np

from . import __version__
from .core import SolverConfig
from .harness import (
    FAMILY_ALIASES,
    DEFAULT_RHO_GRID,
    SOLVER_NAMES,
    SUMMARY_FIELDS,
    RawData,
    RunSpec,
    check_compatible,
    config_dict,
    generate,
    run,
    suite_size,
)
from .problems import load_matrix_csv, load_vector_csv, write_matrix_csv

CONFIG_FIELDS = tuple(f.name for f in fields(SolverConfig))

# run-level defaults; solver-level ones come from SolverConfig
RUN_DEFAULTS = {
    "solver": "apdca-bt",
    "k": None,
    "lam": 5e-4,
    "alpha": 10.0,
    "index_count": None,
    "rho_grid": None,
    "continuation": False,
    "round": True,
    "x0": None,
}

FAMILY_DEFAULTS = {
    "l1l2": {"x0": "zeros"},
    "nnls": {"x0": "uniform"},
    "pca": {"x0": "uniform"},
    "portfolio": {"x0": "uniform", "k": 10, "alpha": 10.0},
}


class CliError(Exception):
    pass


def _zero_clock():
    return 0.0


def _clock(name):
    return time.perf_counter if name == "wall" else _zero_clock


def _float_list(text):
    if text == "default":
        return DEFAULT_RHO_GRID
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad float list {text!r}") from exc


def _int_list(text):
    out = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part[1:]:
            lo, hi = part.split("-", 1)
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(part))
    return out


def _str_list(text):
    return [s.strip() for s in text.split(",") if s.strip()]


def _family(text):
    if text not in FAMILY_ALIASES:
        raise argparse.ArgumentTypeError(
            f"unknown family {text!r}; choose from {sorted(set(FAMILY_ALIASES))}")
    return FAMILY_ALIASES[text]


def _jsonable(v):
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return None if not math.isfinite(v) else v
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, tuple):
        return list(v)
    return v


def _write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_jsonable)
        fh.write("\n")


def _write_rows_csv(path, rows, columns):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_cell(row.get(c)) for c in columns])


def _cell(v):
    if isinstance(v, float):
        return repr(v)
    return "" if v is None else str(v)


def _ensure_dir(path):
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as exc:
        raise CliError(f"cannot create directory {path}: {exc.strerror}") from exc


# ---------------------------------------------------------------- gen-data

def cmd_gen_data(args):
    family = args.family
    if args.m is None or args.n is None:
        m0, n0, k0 = suite_size(family, 1)
        m = m0 if args.m is None else args.m
        n = n0 if args.n is None else args.n
    else:
        m, n = args.m, args.n
    k = args.k
    if family == "l1l2" and k is None:
        k = max(1, n // 32)
    for d in (m, n) + ((k,) if k is not None else ()):
        if d < 1:
            raise CliError("invalid dimension")
    if k is not None and k > n:
        raise CliError("invalid dimension: k exceeds n")
    data = generate(family, m, n, k, args.seed)
    _ensure_dir(args.out_dir)
    files = {}
    try:
        if data.A is not None:
            write_matrix_csv(os.path.join(args.out_dir, "A.csv"), data.A)
            write_matrix_csv(os.path.join(args.out_dir, "b.csv"), data.b.reshape(-1, 1))
            write_matrix_csv(os.path.join(args.out_dir, "xbar.csv"), data.xbar.reshape(-1, 1))
            files = {"A": "A.csv", "b": "b.csv", "xbar": "xbar.csv"}
        else:
            write_matrix_csv(os.path.join(args.out_dir, "V.csv"), data.V)
            write_matrix_csv(os.path.join(args.out_dir, "r.csv"), data.r.reshape(-1, 1))
            files = {"V": "V.csv", "r": "r.csv"}
        _write_json(os.path.join(args.out_dir, "manifest.json"), {
            "command": "gen-data",
            "version": __version__,
            "family": family, "m": m, "n": n, "k": k, "seed": args.seed,
            "files": files,
        })
    except OSError as exc:
        raise CliError(f"cannot write to {args.out_dir}: {exc.strerror}") from exc
    print(f"wrote {', '.join(files.values())} to {args.out_dir}")
    return 0


# ---------------------------------------------------------------- solve

def _load_config_file(path):
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise CliError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise CliError("config file must hold a JSON object")
    known = set(CONFIG_FIELDS) | set(RUN_DEFAULTS) | {"problem", "m", "n", "seed"}
    unknown = sorted(set(cfg) - known)
    if unknown:
        raise CliError(f"unknown config keys: {', '.join(unknown)}")
    return cfg


def _resolve(args, file_cfg, family):
    """Merge defaults < family defaults < config file < explicit flags."""
    merged = dict(RUN_DEFAULTS)
    merged.update(FAMILY_DEFAULTS.get(family, {}))
    merged.update({k: v for k, v in file_cfg.items() if k in RUN_DEFAULTS})
    solver_cfg = {k: v for k, v in file_cfg.items() if k in CONFIG_FIELDS}
    for key in RUN_DEFAULTS:
        val = getattr(args, key, None)
        if val is not None:
            merged[key] = val
    for key in CONFIG_FIELDS:
        val = getattr(args, key, None)
        if val is not None:
            solver_cfg[key] = val
    if merged["rho_grid"] is not None:
        merged["rho_grid"] = tuple(float(r) for r in merged["rho_grid"])
    try:
        cfg = SolverConfig(**solver_cfg)
    except (TypeError, ValueError) as exc:
        raise CliError(f"invalid solver config: {exc}") from exc
    return merged, cfg


def _load_data(args, family, seed):
    if args.data_dir is not None:
        d = args.data_dir
        try:
            if family in ("l1l2", "nnls"):
                A = load_matrix_csv(os.path.join(d, "A.csv"))
                b = load_vector_csv(os.path.join(d, "b.csv"))
                if A.shape[0] != b.size:
                    raise CliError(f"dimension mismatch: A is {A.shape}, b has {b.size}")
                return RawData(family, A=A, b=b)
            V = load_matrix_csv(os.path.join(d, "V.csv"))
            rpath = os.path.join(d, "r.csv")
            r = load_vector_csv(rpath) if os.path.exists(rpath) else np.zeros(V.shape[0])
            return RawData(family, V=V, r=r)
        except OSError as exc:
            raise CliError(f"cannot read data: {exc}") from exc
    m0, n0, k0 = suite_size(family, 1)
    m = m0 if args.m is None else args.m
    n = n0 if args.n is None else args.n
    if m < 1 or n < 1:
        raise CliError("invalid dimension")
    if family == "l1l2":
        k = args.gen_k if args.gen_k is not None else (args.k if args.k is not None else k0)
        if not 1 <= k <= n:
            raise CliError("invalid dimension: k exceeds n")
    else:
        k = None
    return generate(family, m, n, k, seed)


def _parse_x0(value, n):
    if value in ("zeros", "uniform"):
        return value
    try:
        x0 = load_vector_csv(value)
    except OSError as exc:
        raise CliError(f"cannot read x0 file {value}: {exc.strerror}") from exc
    if x0.size != n:
        raise CliError(f"x0 has length {x0.size}, expected {n}")
    return x0


def _default_k(family, n):
    if family == "nnls":
        return max(1, round(n / 10))
    if family == "pca":
        return max(1, n // 10)
    return None


def cmd_solve(args):
    family = args.problem
    file_cfg = _load_config_file(args.config)
    merged, cfg = _resolve(args, file_cfg, family)
    try:
        check_compatible(family, merged["solver"])
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    data = _load_data(args, family, cfg.seed)
    k = merged["k"] if merged["k"] is not None else _default_k(family, data.n)
    spec = RunSpec(
        family=family, solver=merged["solver"], k=k, lam=merged["lam"],
        alpha=merged["alpha"], index_count=merged["index_count"],
        rho_grid=merged["rho_grid"], continuation=merged["continuation"],
        rounding=merged["round"], x0=_parse_x0(merged["x0"], data.n),
        seed=cfg.seed, config=cfg,
    )
    try:
        out = run(data, spec, clock=_clock(args.clock))
    except (ValueError, RuntimeError) as exc:
        raise CliError(str(exc)) from exc
    summary = out.summary
    if not args.report_tl:
        summary = {k: v for k, v in summary.items() if k != "t_L"}

    if args.trace:
        _ensure_parent(args.trace)
        out.result.trace.write_csv(args.trace)
    if args.summary:
        _ensure_parent(args.summary)
        base, ext = os.path.splitext(args.summary)
        json_path = args.summary if ext == ".json" else base + ".json"
        _write_json(json_path, summary)
        _write_rows_csv(base + ".csv", [summary], [c for c in SUMMARY_FIELDS if c in summary])
    if args.x_out:
        _ensure_parent(args.x_out)
        write_matrix_csv(args.x_out, out.x.reshape(-1, 1))
    manifest_dir = _manifest_dir(args)
    if manifest_dir is not None:
        _write_json(os.path.join(manifest_dir, "manifest.json"), {
            "command": "solve",
            "version": __version__,
            "seed": cfg.seed,
            "family": family,
            "data_dir": args.data_dir,
            "m": data.m, "n": data.n,
            "run": {key: _jsonable(merged[key]) for key in merged} | {"k": k},
            "config": config_dict(cfg),
            "clock": args.clock,
        })
    if not args.quiet:
        print(json.dumps(summary, default=_jsonable, sort_keys=True))
    return 0 if out.result.status == "converged" else 1



def _ensure_parent(path):
    parent = os.path.dirname(os.path.abspath(path))
    _ensure_dir(parent)


def _manifest_dir(args):
    for p in (args.summary, args.trace):
        if p:
            return os.path.dirname(os.path.abspath(p))
    return None


# ---------------------------------------------------------------- bench

BENCH_SOLVERS = {
    "l1l2": ("apdca-fix", "apdca-bt", "pdcae"),
    "nnls": ("pdca-bt", "apdca-bt"),
    "pca": ("pdca-bt", "apdca-bt"),
    "portfolio": ("pdca-bt", "apdca-bt"),
}
MEDIAN_FIELDS = ("objective", "time", "iterations", "cardinality")


def _bench_task(task):
    suite, size, seed, solver, k, grid, cfg, clock_name, trace_dir = task
    m, n, k_default = suite_size(suite, size)
    k = k_default if k is None else k
    data = generate(suite, m, n, k, seed)
    spec = RunSpec(
        family=suite, solver=solver, k=k,
        rho_grid=None if suite == "l1l2" else grid,
        x0=FAMILY_DEFAULTS[suite]["x0"],
        rounding=suite != "l1l2",
        seed=seed, config=cfg,
    )
    out = run(data, spec, clock=_clock(clock_name))
    row = dict(out.summary)
    row["size"] = size
    if trace_dir is not None:
        path = os.path.join(trace_dir, f"{suite}_i{size}_s{seed}_{solver}.csv")
        out.result.trace.write_csv(path)
    return row


def cmd_bench(args):
    suite = args.suite
    solvers = args.solvers or list(BENCH_SOLVERS[suite])
    for s in solvers:
        try:
            check_compatible(suite, s)
        except ValueError as exc:
            raise CliError(str(exc)) from exc
    sizes, seeds = args.sizes, args.seeds
    if not sizes or not seeds or not solvers:
        raise CliError("empty cross-product: need at least one size, seed and solver")
    file_cfg = _load_config_file(args.config)
    solver_cfg = {k: v for k, v in file_cfg.items() if k in CONFIG_FIELDS}
    for key in ("rel_tol", "max_iter"):
        if getattr(args, key) is not None:
            solver_cfg[key] = getattr(args, key)
    try:
        cfg = SolverConfig(**solver_cfg)
    except (TypeError, ValueError) as exc:
        raise CliError(f"invalid solver config: {exc}") from exc
    grid = args.rho_grid if args.rho_grid is not None else DEFAULT_RHO_GRID

    _ensure_dir(args.out_dir)
    trace_dir = os.path.join(args.out_dir, "traces")
    _ensure_dir(trace_dir)
    tasks = [(suite, size, seed, solver, args.k, grid, cfg, args.clock, trace_dir)
             for size in sizes for seed in seeds for solver in solvers]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(_bench_task, tasks))
    else:
        rows = [_bench_task(t) for t in tasks]

    columns = ("size",) + SUMMARY_FIELDS
    _write_rows_csv(os.path.join(args.out_dir, "rows.csv"), rows, columns)
    medians = []
    for size in sizes:
        for solver in solvers:
            sel = [r for r in rows if r["size"] == size and r["solver"] == solver]
            med = {"size": size, "solver": solver, "runs": len(sel)}
            for f in MEDIAN_FIELDS:
                med[f] = float(statistics.median(r[f] for r in sel))
            medians.append(med)
    _write_rows_csv(os.path.join(args.out_dir, "medians.csv"), medians,
                    ("size", "solver", "runs") + MEDIAN_FIELDS)
    _write_json(os.path.join(args.out_dir, "summary.json"), {"rows": rows, "medians": medians})
    _write_json(os.path.join(args.out_dir, "manifest.json"), {
        "command": "bench",
        "version": __version__,
        "suite": suite, "sizes": sizes, "seeds": seeds, "solvers": solvers,
        "k": args.k, "rho_grid": list(grid), "jobs": args.jobs, "clock": args.clock,
        "config": config_dict(cfg),
    })
    if not args.quiet:
        for med in medians:
            print(f"i={med['size']} {med['solver']:>10}  obj={med['objective']:.6g}  "
                  f"time={med['time']:.3g}s  iter={med['iterations']:.0f}  "
                  f"card={med['cardinality']:.0f}")
    return 0 if all(r["status"] == "converged" for r in rows) else 1


# ---------------------------------------------------------------- parser

def _add_solver_flags(p):
    p.add_argument("--sigma", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--eta-nm", dest="eta_nm", type=float)
    p.add_argument("--eta-bt", dest="eta_bt", type=float)
    p.add_argument("--l-min", dest="l_min", type=float)
    p.add_argument("--l-max", dest="l_max", type=float)
    p.add_argument("--bb-rule", dest="bb_rule", choices=("curvature", "inverse"))


def build_parser():
    parser = argparse.ArgumentParser(
        prog="sparsedc",
        description="Cardinality-constrained optimization via a quadratic DC penalty.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-data", help="write a synthetic instance to CSV")
    g.add_argument("--family", type=_family, required=True)
    g.add_argument("--m", type=int)
    g.add_argument("--n", type=int)
    g.add_argument("--k", type=int)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out-dir", dest="out_dir", required=True)
    g.set_defaults(func=cmd_gen_data)

    s = sub.add_parser("solve", help="solve one instance")
    s.add_argument("--problem", type=_family, required=True)
    s.add_argument("--data-dir", dest="data_dir",
                   help="directory with A.csv/b.csv or V.csv/r.csv; otherwise data is generated")
    s.add_argument("--m", type=int)
    s.add_argument("--n", type=int)
    s.add_argument("--gen-k", dest="gen_k", type=int,
                   help="sparsity of the generated truth (l1l2 only)")
    s.add_argument("--solver", choices=SOLVER_NAMES)
    s.add_argument("--k", type=int)
    s.add_argument("--rho", type=float)
    s.add_argument("--rho-grid", dest="rho_grid", type=_float_list,
                   help="comma list or 'default' for 1e-4..1e4")
    s.add_argument("--continuation", action="store_const", const=True)
    s.add_argument("--lam", type=float, help="l1-l2 weight")
    s.add_argument("--alpha", type=float, help="portfolio risk aversion")
    s.add_argument("--index-count", dest="index_count", type=int,
                   help="nnls: constrain the first N coordinates (default n // 10)")
    _add_solver_flags(s)
    s.add_argument("--rel-tol", dest="rel_tol", type=float)
    s.add_argument("--max-iter", dest="max_iter", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--x0", help="zeros, uniform or a CSV path")
    s.add_argument("--round", dest="round", action="store_const", const=True)
    s.add_argument("--no-round", dest="round", action="store_const", const=False)
    s.add_argument("--trace")
    s.add_argument("--summary", help="summary path; .json and .csv are both written")
    s.add_argument("--x-out", dest="x_out", help="write the final iterate as CSV")
    s.add_argument("--config", help="JSON file of defaults, overridden by flags")
    s.add_argument("--clock", choices=("wall", "off"), default="wall")
    s.add_argument("--report-tl", dest="report_tl", action="store_true",
                   help="report Lipschitz-estimation time separately")
    s.add_argument("--quiet", action="store_true")
    s.set_defaults(func=cmd_solve)

    b = sub.add_parser("bench", help="run a solver comparison suite")
    b.add_argument("--suite", type=_family, required=True)
    b.add_argument("--sizes", type=_int_list, default=[1])
    b.add_argument("--seeds", type=_int_list, default=[1])
    b.add_argument("--solvers", type=_str_list)
    b.add_argument("--k", type=int)
    b.add_argument("--rho-grid", dest="rho_grid", type=_float_list)
    b.add_argument("--rel-tol", dest="rel_tol", type=float)
    b.add_argument("--max-iter", dest="max_iter", type=int)
    b.add_argument("--config")
    b.add_argument("--out-dir", dest="out_dir", required=True)
    b.add_argument("--jobs", type=int, default=1)
    b.add_argument("--clock", choices=("wall", "off"), default="wall")
    b.add_argument("--quiet", action="store_true")
    b.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
