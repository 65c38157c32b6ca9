"""On-path split row generation, lazy and iterative."""

import itertools

import numpy as np
import pytest

import treeopt as T
from treeopt.bnb import BnbConfig
from treeopt.encoding import encode
from treeopt.errors import SolveError
from treeopt.formulation import build_restricted, split_row
from treeopt.oracle import InstanceSpec, brute_force_opt, random_instance
from treeopt.splitgen import (
    _restricted_primal,
    find_violation,
    solve_splitgen_iterative,
    solve_splitgen_lazy,
    tree_mass,
)

from test_trees import fixture_ensemble, sample_points


def exhaustive_violation(model, t, x, primal, tol=1e-6):
    """Scan every routing row of tree t for a violation, in path order."""
    tree = model.ensemble.trees[t]
    out = []
    for s in tree.splits:
        route = tree.route_sum(int(s), x)
        left_mass = primal[[model.y_col[(t, int(l))] for l in tree.left_leaves(int(s))]].sum()
        right_mass = primal[[model.y_col[(t, int(l))] for l in tree.right_leaves(int(s))]].sum()
        if left_mass > route + tol:
            out.append((int(s), "left"))
        if right_mass + route > 1 + tol:
            out.append((int(s), "right"))
    return out


def random_mass_primal(model, rng, x):
    """Random per-tree mass distributions (not necessarily row-feasible)."""
    primal = np.zeros(model.n_cols)
    primal[: model.x_cols] = x
    ens = model.ensemble
    for t, tree in enumerate(ens.trees):
        # quantized so near-tolerance noise cannot flip the comparison
        w = rng.integers(0, 4, size=tree.n_leaves).astype(float)
        if w.sum() == 0:
            w[rng.integers(tree.n_leaves)] = 1.0
        w = w / w.sum()
        for pos, l in enumerate(tree.leaves):
            primal[model.y_col[(t, int(l))]] = w[pos]
    return primal


def test_walk_finds_a_violation_iff_one_exists():
    rng = np.random.default_rng(31)
    checked = violated = 0
    for seed in range(15):
        ens = random_instance(InstanceSpec(n_vars=5, n_trees=4, max_depth=4,
                                           categorical_fraction=0.4, seed=4000 + seed))
        model = build_restricted(ens, ())
        for X in sample_points(ens.schema, rng, 17):
            x = encode(ens.schema, X)
            primal = random_mass_primal(model, rng, x)
            for t in range(ens.n_trees):
                hit = find_violation(model, t, x, primal)
                all_hits = exhaustive_violation(model, t, x, primal)
                if hit is None:
                    assert all_hits == []
                else:
                    assert hit in all_hits
                    violated += 1
                checked += 1
    assert checked >= 1000
    assert violated >= 100  # random masses trip rows often


def test_no_violation_means_mass_on_reached_leaf():
    ens = fixture_ensemble()
    model = build_restricted(ens, ())
    x = encode(ens.schema, [3.0, 2])
    primal = _restricted_primal(model, x)
    # the deterministic primal puts each tree's unit on its best allowed leaf;
    # with no rows at all that leaf may differ from the reached one
    for t, tree in enumerate(ens.trees):
        assert tree_mass(model, t, primal).sum() == pytest.approx(1.0)
    full = T.build_full(ens)
    exact_primal = _restricted_primal(full, x)
    for t, tree in enumerate(ens.trees):
        assert find_violation(full, t, x, exact_primal) is None
        mass = tree_mass(full, t, exact_primal)
        assert mass[tree.leaf_pos[tree.leaf_for(x)]] == 1.0


def test_lazy_matches_brute_force():
    for seed in range(20):
        ens = random_instance(InstanceSpec(seed=4100 + seed))
        _, z_star = brute_force_opt(ens)
        res = solve_splitgen_lazy(ens)
        assert res.status == "optimal"
        assert res.objective == pytest.approx(z_star, abs=1e-6 * max(1, abs(z_star)))
        assert ens.predict(res.X) == pytest.approx(res.objective, abs=1e-12)


def test_iterative_matches_brute_force():
    for seed in range(20):
        ens = random_instance(InstanceSpec(seed=4200 + seed))
        _, z_star = brute_force_opt(ens)
        res = solve_splitgen_iterative(ens)
        assert res.status == "optimal"
        assert res.objective == pytest.approx(z_star, abs=1e-6 * max(1, abs(z_star)))
        assert "active_rows_final" in res.stats
        assert res.stats["active_rows_final"] <= len(T.all_split_pairs(ens))


def test_iterative_trace_objectives_never_increase():
    for seed in range(12):
        ens = random_instance(InstanceSpec(n_vars=5, n_trees=7, max_depth=4,
                                           seed=4300 + seed))
        res = solve_splitgen_iterative(ens)
        rounds = res.stats["rounds"]
        assert [r["round"] for r in rounds] == list(range(1, len(rounds) + 1))
        objs = [r["objective"] for r in rounds]
        # each round only adds rows, so restricted optima shrink monotonically
        for a, b in zip(objs, objs[1:]):
            assert b <= a + 1e-7 * max(1.0, abs(a))
        active = [r["active_rows"] for r in rounds]
        assert active[0] == 0
        assert all(b > a for a, b in zip(active, active[1:]))


def test_warm_start_does_not_change_the_answer():
    for seed in range(8):
        ens = random_instance(InstanceSpec(seed=4400 + seed))
        X0, _ = brute_force_opt(ens)
        plain = solve_splitgen_lazy(ens)
        warm = solve_splitgen_lazy(ens, warm_start_X=X0)
        assert warm.objective == pytest.approx(plain.objective, abs=1e-9)
        it_warm = solve_splitgen_iterative(ens, warm_start_X=X0)
        assert it_warm.objective == pytest.approx(plain.objective, abs=1e-9)


def test_round_cap_reports_honest_limit_result():
    ens = random_instance(InstanceSpec(n_vars=6, n_trees=10, max_depth=4, seed=5))
    _, z_star = brute_force_opt(ens)
    res = solve_splitgen_iterative(ens, max_rounds=1)
    assert res.status == "limit-reached"
    # the incumbent is re-scored against the full ensemble, never the
    # restricted model's optimistic reading
    assert res.objective == ens.predict_encoding(res.x)
    assert res.objective <= z_star + 1e-9
    assert res.bound >= z_star - 1e-9
    assert res.gap >= 0


def test_restricted_primal_honors_present_rows():
    ens = fixture_ensemble()
    root = int(ens.trees[0].root)
    model = build_restricted(ens, [(0, root, "left"), (0, root, "right")])
    x = encode(ens.schema, [9.0, 1])  # routes right at tree 0's root
    primal = _restricted_primal(model, x)
    t0 = ens.trees[0]
    mass = tree_mass(model, 0, primal)
    blocked = t0.right_leaf_pos(root)
    # mass may not sit on the branch the present rows forbid
    assert mass[t0.left_leaf_pos(root)].sum() == 0.0
    assert mass[blocked].sum() == 1.0
    assert model.objective_value(primal) == model.incumbent_value(x)


def test_split_row_keys_match_generator_keys():
    ens = fixture_ensemble()
    model = build_restricted(ens, ())
    x = encode(ens.schema, [3.0, 2])
    primal = random_mass_primal(model, np.random.default_rng(0), x)
    for t in range(ens.n_trees):
        hit = find_violation(model, t, x, primal)
        if hit is None:
            continue
        s, side = hit
        row = split_row(model, t, s, side)
        assert row.key == ("split", t, s, side)
