"""Command line front end.

Subcommands: optimize (solve one model), gen (write a random instance),
bench (method sweep to a delimited file plus figures), validate (load
and summarize a model file), convert (text dump to the JSON format).
Exit codes: 0 solved to optimality, 2 stopped at a limit, 1 error or
infeasible.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

from . import bench as bench_mod
from . import plots
from .benders import build_master
from .bnb import BnbConfig, solve_milp
from .encoding import encode
from .errors import ConfigError, TreeoptError
from .formulation import (
    add_proximity_constraints,
    build_full,
    build_standard_linearization,
    build_truncated,
    export_lp_text,
    proximity_vectors,
    truncation_bound,
)
from .local_search import multi_start
from .model_io import convert_text_dump, load_ensemble, load_points, save_ensemble
from .oracle import InstanceSpec, random_instance
from .splitgen import (
    attach_row_generation,
    build_restricted,
    solve_splitgen_iterative,
)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_LIMIT = 2


def _config_from(args) -> BnbConfig:
    return BnbConfig(
        rel_gap=args.rel_gap,
        time_limit=args.time_limit,
        node_limit=args.node_limit,
    )


def _fmt_cells(schema, cells) -> list[str]:
    out = []
    for v, (lo, hi) in zip(schema.variables, cells):
        if v.kind == "categorical":
            out.append(f"{v.name} = {int(lo)}")
        else:
            close = ")" if hi == float("inf") else "]"
            out.append(f"{v.name} in ({lo:g}, {hi:g}{close}")
    return out


def cmd_optimize(args) -> int:
    ens = load_ensemble(args.model)
    config = _config_from(args)

    if args.method == "local-search":
        ms = multi_start(ens, restarts=args.restarts, seed=args.seed)
        payload = {
            "status": "heuristic",
            "objective": ms.objective,
            "X": [float(v) for v in ms.X],
            "start_objectives": ms.start_objectives,
        }
        _emit(args, payload, ens)
        return EXIT_OK

    if args.warm_start:
        X0 = load_points(args.warm_start)[0]
        config = replace(config, initial_x=encode(ens.schema, X0))

    model = None
    if args.method == "direct":
        model = build_truncated(ens, args.depth) if args.depth else build_full(ens)
    elif args.method == "stdlin":
        model = build_standard_linearization(ens)
    elif args.method == "benders":
        model = build_master(ens)
    elif args.method == "splitgen-lazy":
        model = attach_row_generation(build_restricted(ens, ()))
    elif args.method != "splitgen-iter":
        raise ConfigError(f"unknown method {args.method!r}")
    if args.depth and args.method != "direct":
        raise ConfigError("depth truncation applies to the direct method")

    if args.proximity:
        if model is None or args.method != "direct":
            raise ConfigError("proximity constraints apply to the direct method")
        pts = load_points(args.proximity)
        add_proximity_constraints(model, proximity_vectors(ens, pts), args.cap)

    if args.lp_out:
        if model is None:
            raise ConfigError(f"{args.method} has no single model to export")
        export_lp_text(model, args.lp_out)

    if args.method == "splitgen-iter":
        res = solve_splitgen_iterative(ens, config)
    else:
        res = solve_milp(model, config)

    payload = {
        "status": res.status,
        "objective": None if res.x is None else res.objective,
        "bound": res.bound,
        "gap": res.gap,
        "nodes": res.stats.get("nodes", 0),
        "cuts": sum(res.stats.get("cuts", {}).values())
        + res.stats.get("active_rows_final", 0),
    }
    if res.x is not None:
        payload["X"] = [float(v) for v in res.X]
        payload["cells"] = _fmt_cells(ens.schema, res.cells)
    if args.depth:
        tb = truncation_bound(ens, args.depth)
        payload["truncation"] = {
            "depth": args.depth,
            "value_at_argmax": float(ens.predict_encoding(res.x)) if res.x is not None else None,
            "a_priori_lower": res.objective - tb.total if res.x is not None else None,
        }
    _emit(args, payload, ens)
    if res.status == "optimal":
        return EXIT_OK
    if res.status == "limit-reached":
        return EXIT_LIMIT
    return EXIT_ERROR


def _emit(args, payload: dict, ens) -> None:
    if args.json:
        print(json.dumps(payload, indent=2, sort_keys=True))
        return
    for key in ("status", "objective", "bound", "gap", "nodes", "cuts"):
        if key in payload and payload[key] is not None:
            val = payload[key]
            print(f"{key}: {val:.9g}" if isinstance(val, float) else f"{key}: {val}")
    if "X" in payload:
        names = [v.name for v in ens.schema.variables]
        print("X*: " + "  ".join(f"{n}={v:g}" for n, v in zip(names, payload["X"])))
    if "cells" in payload:
        print("cell: " + "; ".join(payload["cells"]))
    if "truncation" in payload:
        t = payload["truncation"]
        print(
            f"truncation: depth={t['depth']}"
            f" value_at_argmax={t['value_at_argmax']:.9g}"
            f" a_priori_lower={t['a_priori_lower']:.9g}"
        )
    if "start_objectives" in payload:
        print("starts: " + "  ".join(f"{v:.6g}" for v in payload["start_objectives"]))


def _spec_from(args, seed) -> InstanceSpec:
    return InstanceSpec(
        n_vars=args.vars,
        n_trees=args.trees,
        max_depth=args.max_depth,
        max_split_points=args.points,
        categorical_fraction=args.cat_fraction,
        max_levels=args.levels,
        seed=seed,
    )


def cmd_gen(args) -> int:
    ens = random_instance(_spec_from(args, args.seed))
    save_ensemble(ens, args.out)
    print(f"wrote {args.out}: {ens.n_trees} trees, {ens.n_levels} levels, "
          f"{ens.n_leaves} leaves")
    return EXIT_OK


def _sweep_one(task):
    spec, methods, config = task
    ens = random_instance(spec)
    return bench_mod.run_instance(f"rand-{spec.seed}", ens, methods, config,
                                  seed=spec.seed)


def cmd_bench(args) -> int:
    methods = tuple(args.methods.split(","))
    for m in methods:
        if m not in bench_mod.METHOD_NAMES:
            raise ConfigError(f"unknown method {m!r}")
    config = _config_from(args)
    specs = [_spec_from(args, args.seed + k) for k in range(args.instances)]
    workers = args.workers or int(os.environ.get("TREEOPT_WORKERS", "1"))

    tasks = [(spec, methods, config) for spec in specs]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            per_instance = list(pool.map(_sweep_one, tasks))
    else:
        per_instance = [_sweep_one(t) for t in tasks]
    records = [rec for group in per_instance for rec in group]

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    sidecar_config = {
        "methods": list(methods),
        "instances": args.instances,
        "seed": args.seed,
        "trees": args.trees,
        "vars": args.vars,
        "max_depth": args.max_depth,
        "points": args.points,
        "cat_fraction": args.cat_fraction,
        "levels": args.levels,
        "rel_gap": args.rel_gap,
        "time_limit": args.time_limit,
        "node_limit": args.node_limit,
        "workers": workers,
    }
    bench_mod.write_records(records, out, sidecar_config)
    print(f"wrote {out} ({len(records)} records)")

    if not args.no_figures:
        fig_dir = out.parent
        p = plots.plot_method_comparison(records, fig_dir / f"{out.stem}_methods.png")
        print(f"wrote {p}")
        if args.depth_sweep:
            ens = random_instance(specs[0])
            sweep = bench_mod.run_depth_sweep(ens, f"rand-{specs[0].seed}",
                                              config=config)
            bench_mod.write_records(sweep, fig_dir / f"{out.stem}_depth.csv",
                                    sidecar_config)
            p = plots.plot_depth_sweep(sweep, fig_dir / f"{out.stem}_depth.png")
            print(f"wrote {p}")
    return EXIT_OK


def cmd_validate(args) -> int:
    ens = load_ensemble(args.model)
    schema = ens.schema
    print(f"trees: {ens.n_trees}")
    print(f"variables: {schema.n_vars} ({sum(schema.active)} active)")
    print(f"levels: {ens.n_levels}")
    print(f"leaves: {ens.n_leaves}")
    print(f"max split depth: {ens.max_split_depth}")
    return EXIT_OK


def cmd_convert(args) -> int:
    ens = convert_text_dump(args.input, args.out)
    print(f"wrote {args.out}: {ens.n_trees} trees, {ens.n_levels} levels")
    return EXIT_OK


def _add_instance_args(p: argparse.ArgumentParser):
    p.add_argument("--trees", type=int, default=5)
    p.add_argument("--vars", type=int, default=4)
    p.add_argument("--max-depth", type=int, default=3)
    p.add_argument("--points", type=int, default=3,
                   help="max split points per numeric variable")
    p.add_argument("--cat-fraction", type=float, default=0.25)
    p.add_argument("--levels", type=int, default=4,
                   help="max levels per categorical variable")
    p.add_argument("--seed", type=int, default=0)


def _add_solve_args(p: argparse.ArgumentParser):
    p.add_argument("--rel-gap", type=float, default=1e-6)
    p.add_argument("--time-limit", type=float, default=0.0)
    p.add_argument("--node-limit", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="treeopt",
                                 description="Maximize tree-ensemble predictions.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("optimize", help="solve one model file")
    p.add_argument("model")
    p.add_argument("--method", default="direct",
                   choices=["direct", "stdlin", "benders", "splitgen-lazy",
                            "splitgen-iter", "local-search"])
    p.add_argument("--depth", type=int, default=0,
                   help="keep split rows down to this depth only")
    p.add_argument("--proximity", help="points file for proximity constraints")
    p.add_argument("--cap", type=float, default=0.5, help="proximity cap")
    p.add_argument("--warm-start", help="points file; first row seeds the incumbent")
    p.add_argument("--lp-out", help="write the model in LP text form")
    p.add_argument("--restarts", type=int, default=10, help="local search restarts")
    p.add_argument("--seed", type=int, default=0, help="local search seed")
    p.add_argument("--json", action="store_true")
    _add_solve_args(p)
    p.set_defaults(fn=cmd_optimize)

    p = sub.add_parser("gen", help="write a random instance")
    _add_instance_args(p)
    p.add_argument("--out", default="instance.json")
    p.set_defaults(fn=cmd_gen)

    p = sub.add_parser("bench", help="run a method sweep")
    _add_instance_args(p)
    p.add_argument("--instances", type=int, default=5)
    p.add_argument("--methods", default=",".join(bench_mod.METHOD_NAMES))
    p.add_argument("--out", default="results.csv")
    p.add_argument("--no-figures", action="store_true")
    p.add_argument("--depth-sweep", action="store_true",
                   help="also sweep truncation depth on the first instance")
    p.add_argument("--workers", type=int, default=0,
                   help="parallel instances (default TREEOPT_WORKERS or 1)")
    _add_solve_args(p)
    p.set_defaults(fn=cmd_bench)

    p = sub.add_parser("validate", help="load a model file and summarize it")
    p.add_argument("model")
    p.set_defaults(fn=cmd_validate)

    p = sub.add_parser("convert", help="convert a text tree dump to JSON")
    p.add_argument("input")
    p.add_argument("out")
    p.set_defaults(fn=cmd_convert)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except TreeoptError as e:
        code = getattr(e, "code", None)
        prefix = f"error[{code}]" if code else "error"
        print(f"{prefix}: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
