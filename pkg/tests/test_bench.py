"""Benchmark harness records, cross-method invariants, serialization."""

import math

import numpy as np
import pytest

import treeopt as T
from treeopt.bench import (
    EXACT_METHODS,
    METHOD_NAMES,
    BenchRecord,
    read_records,
    run_depth_sweep,
    run_instance,
    run_method_sweep,
    run_proximity_frontier,
    solve_with,
    write_records,
)
from treeopt.errors import ConfigError, SolveError
from treeopt.oracle import InstanceSpec, brute_force_opt, cell_representatives, random_instance

from test_trees import fixture_ensemble


def test_method_names_cover_every_solver():
    assert METHOD_NAMES == ("direct", "stdlin", "benders", "splitgen-lazy",
                            "splitgen-iter", "local-search")
    assert EXACT_METHODS == frozenset(METHOD_NAMES[:-1])


def test_solve_with_dispatch():
    ens = fixture_ensemble()
    for m in METHOD_NAMES:
        out = solve_with(m, ens)
        assert out["time_ms"] >= 0
        if m in EXACT_METHODS:
            assert out["z_lb"] == pytest.approx(7.0, abs=1e-9)
            assert out["z_ub"] >= 7.0 - 1e-9
        else:
            assert out["z_lb"] <= 7.0 + 1e-9
            assert out["z_ub"] is None
    with pytest.raises(ConfigError):
        solve_with("gurobi", ens)


def test_run_instance_record_invariants():
    ens = random_instance(InstanceSpec(n_vars=5, n_trees=6, max_depth=4, seed=60))
    _, z_star = brute_force_opt(ens)
    records = run_instance("inst-60", ens)
    assert [r.method for r in records] == list(METHOD_NAMES)
    by_method = {r.method: r for r in records}
    for r in records:
        assert r.instance_id == "inst-60"
        assert r.T == ens.n_trees
        assert r.n_levels == ens.schema.n_bits
        assert r.n_leaves == sum(t.n_leaves for t in ens.trees)
        assert r.time_ms >= 0.0
        if r.method in EXACT_METHODS:
            assert r.z_lb == pytest.approx(z_star, abs=1e-6 * max(1, abs(z_star)))
            # relaxation gaps are nonnegative and shared across methods
            assert r.g_lo_pct == by_method["direct"].g_lo_pct
            assert r.g_stdlin_lo_pct >= r.g_lo_pct - 1e-9
            assert r.g_ls_pct is None
        else:
            assert r.g_ls_pct is not None and r.g_ls_pct >= -1e-9
            assert r.z_ub is None and r.gap_pct is None
    assert by_method["stdlin"].g_stdlin_mio_pct is not None
    assert by_method["direct"].g_stdlin_mio_pct is None
    assert by_method["benders"].cuts > 0
    assert by_method["splitgen-iter"].cuts > 0


def test_run_instance_detects_disagreement(monkeypatch):
    import treeopt.bench as bench

    ens = fixture_ensemble()
    real = bench.solve_with

    def lying(method, ensemble, config=None, seed=0):
        out = real(method, ensemble, config, seed)
        if method == "benders":
            out["z_lb"] = out["z_lb"] + 0.5
        return out

    monkeypatch.setattr(bench, "solve_with", lying)
    with pytest.raises(SolveError, match="benders"):
        run_instance("inst", ens, methods=("direct", "benders"))


def test_run_method_sweep_grouping():
    specs = [InstanceSpec(seed=s) for s in (70, 71)]
    records = run_method_sweep(specs, methods=("direct", "local-search"))
    assert len(records) == 4
    assert {r.instance_id for r in records} == {"rand-70", "rand-71"}


def test_depth_sweep_sandwich():
    ens = random_instance(InstanceSpec(n_vars=5, n_trees=6, max_depth=4, seed=62))
    _, z_star = brute_force_opt(ens)
    records = run_depth_sweep(ens, "inst-62")
    assert [r.depth for r in records] == list(range(1, ens.max_split_depth + 1))
    ubs = [r.z_ub for r in records]
    for a, b in zip(ubs, ubs[1:]):
        assert b <= a + 1e-9  # deeper truncations only tighten
    for r in records:
        assert r.z_ub >= z_star - 1e-9
        assert r.z_lb_apriori <= z_star + 1e-9
        assert r.actual <= z_star + 1e-9
        assert r.z_lb_apriori <= r.z_ub
    # at full depth the truncated model is exact and its argmax is optimal
    last = records[-1]
    assert last.z_ub == pytest.approx(z_star, abs=1e-9)
    assert last.actual == last.z_ub


def test_proximity_frontier_monotone():
    ens = random_instance(InstanceSpec(n_vars=6, n_trees=10, max_depth=4,
                                       max_split_points=4, seed=0))
    rng = np.random.default_rng(0)
    doms = cell_representatives(ens.schema)
    point = np.array([d[rng.integers(len(d))] for d in doms])
    caps = [0.0, 0.2, 0.5, 1.0]
    records = run_proximity_frontier(ens, [point], caps, "inst-p")
    assert [r.cap for r in records] == caps
    feas = [r for r in records if not math.isnan(r.z_lb)]
    assert feas, "at least the cap-1.0 row must be feasible"
    for r in feas:
        assert r.max_proximity <= r.cap + 1e-9
    objs = [r.z_lb for r in feas]
    for a, b in zip(objs, objs[1:]):
        assert b >= a - 1e-9  # looser caps can only help
    # cap 1.0 never binds
    _, z_star = brute_force_opt(ens)
    assert records[-1].z_lb == pytest.approx(z_star, abs=1e-6 * max(1, abs(z_star)))


def test_proximity_frontier_infeasible_rows_are_nan():
    # two reference points in different cells make cap 0 impossible for a
    # stump over one variable: every cell agrees with one of them
    tree = [{"id": 0, "kind": "split", "var": 0, "threshold": 1.0,
             "left": 1, "right": 2},
            {"id": 1, "kind": "leaf", "value": 1.0},
            {"id": 2, "kind": "leaf", "value": 2.0}]
    ens = T.assemble([tree], [1.0])
    records = run_proximity_frontier(ens, [[1.0], [2.0]], [0.0, 1.0])
    assert math.isnan(records[0].z_lb) and math.isnan(records[0].max_proximity)
    assert records[1].z_lb == 2.0


def test_write_and_read_records_roundtrip(tmp_path):
    ens = fixture_ensemble()
    records = run_instance("fix", ens, methods=("direct", "local-search"))
    out = tmp_path / "bench.csv"
    write_records(records, out, config={"note": "fixture", "seed": 0})
    assert out.exists()
    sidecar = tmp_path / "bench.json"
    assert sidecar.exists()
    import json

    meta = json.loads(sidecar.read_text())
    assert meta["columns"][0] == "instance_id"
    assert meta["config"] == {"note": "fixture", "seed": 0}

    rows = read_records(out)
    assert len(rows) == 2
    assert rows[0]["method"] == "direct"
    assert float(rows[0]["z_lb"]) == 7.0
    assert rows[1]["method"] == "local-search"
    assert rows[1]["z_ub"] == ""  # None serializes to an empty field

    with pytest.raises(ConfigError):
        write_records([], tmp_path / "empty.csv")


def test_csv_bytes_deterministic_modulo_time(tmp_path):
    ens = random_instance(InstanceSpec(seed=63))

    def normalized(path):
        rows = read_records(path)
        for r in rows:
            r["time_ms"] = "X"
        return rows

    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    write_records(run_instance("i", ens), a)
    write_records(run_instance("i", ens), b)
    assert normalized(a) == normalized(b)
