"""Benchmark harness: per-method records with cross-method invariants.

Every exact method run on an instance must agree with the reference
optimum; relaxation gaps are measured against it. Records serialize to
a delimited file plus a JSON sidecar carrying the run configuration, so
a result set is reproducible from its own directory.
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from .benders import solve_benders
from .bnb import BnbConfig, solve_milp
from .errors import ConfigError, SolveError
from .formulation import (
    add_proximity_constraints,
    build_full,
    build_standard_linearization,
    build_truncated,
    proximity,
    proximity_vectors,
    truncation_bound,
)
from .local_search import multi_start
from .oracle import InstanceSpec, random_instance
from .simplex import solve_lp
from .splitgen import solve_splitgen_iterative, solve_splitgen_lazy
from .trees import Ensemble

METHOD_NAMES = ("direct", "stdlin", "benders", "splitgen-lazy", "splitgen-iter",
                "local-search")
EXACT_METHODS = frozenset(METHOD_NAMES[:-1])
AGREE_TOL = 1e-6


@dataclass
class BenchRecord:
    instance_id: str
    method: str
    T: int
    n_levels: int
    n_leaves: int
    time_ms: float
    z_lb: float
    z_ub: float | None
    gap_pct: float | None
    g_lo_pct: float | None
    g_stdlin_lo_pct: float | None
    g_stdlin_mio_pct: float | None
    g_ls_pct: float | None
    cuts: int
    nodes: int


@dataclass
class DepthRecord:
    instance_id: str
    depth: int
    z_ub: float  # truncated optimum
    actual: float  # full-depth value of the truncated argmax
    z_lb_apriori: float  # truncated optimum minus the truncation bound
    time_ms: float
    nodes: int


@dataclass
class FrontierRecord:
    instance_id: str
    cap: float
    z_lb: float
    max_proximity: float  # largest proximity to a reference point at the optimum
    time_ms: float
    nodes: int


def _pct(num: float, den: float) -> float | None:
    if abs(den) < 1e-12:
        return None
    return 100.0 * num / den


def solve_with(method: str, ensemble: Ensemble, config: BnbConfig | None = None,
               seed: int = 0) -> dict:
    """Run one method; return z_lb/z_ub/cuts/nodes/time_ms (+ method extras)."""
    t0 = time.perf_counter()
    out = {"cuts": 0, "nodes": 0, "gap_pct": None}
    if method == "direct":
        res = solve_milp(build_full(ensemble), config)
    elif method == "stdlin":
        res = solve_milp(build_standard_linearization(ensemble), config)
    elif method == "benders":
        res = solve_benders(ensemble, config)
    elif method == "splitgen-lazy":
        res = solve_splitgen_lazy(ensemble, config)
    elif method == "splitgen-iter":
        res = solve_splitgen_iterative(ensemble, config)
    elif method == "local-search":
        ms = multi_start(ensemble, restarts=10, seed=seed)
        out.update(z_lb=ms.objective, z_ub=None,
                   time_ms=1e3 * (time.perf_counter() - t0))
        return out
    else:
        raise ConfigError(f"unknown method {method!r}")
    out.update(
        z_lb=res.objective,
        z_ub=res.bound,
        gap_pct=_pct(res.bound - res.objective, abs(res.bound)),
        nodes=res.stats.get("nodes", 0),
        cuts=sum(res.stats.get("cuts", {}).values())
        + res.stats.get("active_rows_final", 0),
        time_ms=1e3 * (time.perf_counter() - t0),
    )
    return out


def run_instance(instance_id: str, ensemble: Ensemble, methods=METHOD_NAMES,
                 config: BnbConfig | None = None, seed: int = 0) -> list[BenchRecord]:
    """All-method records for one instance, checked against each other."""
    t = ensemble.n_trees
    n_levels = ensemble.n_levels
    n_leaves = ensemble.n_leaves

    lo = solve_lp(build_full(ensemble))
    if lo.status != "optimal":
        raise SolveError(f"{instance_id}: relaxation ended {lo.status}")
    std_lo = solve_lp(build_standard_linearization(ensemble))
    if std_lo.status != "optimal":
        raise SolveError(f"{instance_id}: linearized relaxation ended {std_lo.status}")

    runs = {m: solve_with(m, ensemble, config, seed) for m in methods}
    z_star = None
    for m in methods:
        if m in EXACT_METHODS:
            z_star = runs[m]["z_lb"]
            break

    records = []
    for m in methods:
        run = runs[m]
        if z_star is not None and m in EXACT_METHODS:
            if abs(run["z_lb"] - z_star) > AGREE_TOL * max(1.0, abs(z_star)):
                raise SolveError(
                    f"{instance_id}: {m} found {run['z_lb']!r}, reference {z_star!r}"
                )
        g_lo = g_std_lo = g_ls = g_std_mio = None
        if z_star is not None:
            g_lo = _pct(lo.objective - z_star, z_star)
            g_std_lo = _pct(std_lo.objective - z_star, z_star)
            if m == "local-search":
                g_ls = _pct(z_star - run["z_lb"], z_star)
        if m == "stdlin" and run["z_ub"] is not None:
            g_std_mio = _pct(run["z_ub"] - run["z_lb"], abs(run["z_ub"]))
        records.append(
            BenchRecord(
                instance_id=instance_id,
                method=m,
                T=t,
                n_levels=n_levels,
                n_leaves=n_leaves,
                time_ms=run["time_ms"],
                z_lb=run["z_lb"],
                z_ub=run["z_ub"],
                gap_pct=run["gap_pct"],
                g_lo_pct=g_lo,
                g_stdlin_lo_pct=g_std_lo,
                g_stdlin_mio_pct=g_std_mio,
                g_ls_pct=g_ls,
                cuts=run["cuts"],
                nodes=run["nodes"],
            )
        )
    return records


def run_method_sweep(specs, methods=METHOD_NAMES,
                     config: BnbConfig | None = None) -> list[BenchRecord]:
    records = []
    for spec in specs:
        ens = random_instance(spec)
        records.extend(
            run_instance(f"rand-{spec.seed}", ens, methods, config, seed=spec.seed)
        )
    return records


def run_depth_sweep(ensemble: Ensemble, instance_id: str = "instance", depths=None,
                    config: BnbConfig | None = None) -> list[DepthRecord]:
    if depths is None:
        depths = range(1, ensemble.max_split_depth + 1)
    records = []
    for d in depths:
        t0 = time.perf_counter()
        res = solve_milp(build_truncated(ensemble, d), config)
        if res.status != "optimal":
            raise SolveError(f"{instance_id}: depth {d} solve ended {res.status}")
        tb = truncation_bound(ensemble, d)
        records.append(
            DepthRecord(
                instance_id=instance_id,
                depth=d,
                z_ub=res.objective,
                actual=float(ensemble.predict_encoding(res.x)),
                z_lb_apriori=res.objective - tb.total,
                time_ms=1e3 * (time.perf_counter() - t0),
                nodes=res.stats.get("nodes", 0),
            )
        )
    return records


def run_proximity_frontier(ensemble: Ensemble, points, caps,
                           instance_id: str = "instance",
                           config: BnbConfig | None = None) -> list[FrontierRecord]:
    """Optimize under a proximity cap to reference points, per cap value."""
    vectors = proximity_vectors(ensemble, points)
    records = []
    for cap in caps:
        model = build_full(ensemble)
        add_proximity_constraints(model, vectors, cap)
        t0 = time.perf_counter()
        res = solve_milp(model, config)
        if res.status == "infeasible":
            records.append(FrontierRecord(instance_id, float(cap), float("nan"),
                                          float("nan"),
                                          1e3 * (time.perf_counter() - t0),
                                          res.stats.get("nodes", 0)))
            continue
        if res.status != "optimal":
            raise SolveError(f"{instance_id}: cap {cap} solve ended {res.status}")
        prox = max(proximity(ensemble, res.X, X) for X in points)
        records.append(
            FrontierRecord(
                instance_id=instance_id,
                cap=float(cap),
                z_lb=res.objective,
                max_proximity=prox,
                time_ms=1e3 * (time.perf_counter() - t0),
                nodes=res.stats.get("nodes", 0),
            )
        )
    return records


def write_records(records, path, config: dict | None = None) -> Path:
    """Write records as a delimited file plus a JSON sidecar of the config."""
    if not records:
        raise ConfigError("nothing to write")
    path = Path(path)
    cols = [f.name for f in fields(records[0])]
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for rec in records:
            row = asdict(rec)
            w.writerow(["" if row[c] is None else row[c] for c in cols])
    sidecar = path.with_suffix(".json")
    with sidecar.open("w") as fh:
        json.dump({"columns": cols, "config": config or {}}, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def read_records(path) -> list[dict]:
    with Path(path).open(newline="") as fh:
        return list(csv.DictReader(fh))
