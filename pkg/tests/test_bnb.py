"""Branch-and-bound engine: exactness, limits, lazy-row plumbing."""

import numpy as np
import pytest

import treeopt as T
from treeopt.bnb import BnbConfig, register_lazy, solve_milp
from treeopt.encoding import encode, validate
from treeopt.errors import SolveError
from treeopt.formulation import Row, add_leaf_linear_constraint, build_full
from treeopt.oracle import InstanceSpec, brute_force_opt, random_instance

from test_trees import fixture_ensemble


def test_fixture_optimum():
    ens = fixture_ensemble()
    res = solve_milp(build_full(ens))
    assert res.status == "optimal"
    assert res.objective == 7.0
    assert res.bound >= 7.0 - 1e-9
    assert res.gap <= 1e-6
    assert res.X.tolist() == [5.0, 2.0]
    assert res.cells[0] == (2.0, 5.0)
    assert res.cells[1] == (2.0, 2.0)
    assert ens.predict(res.X) == 7.0
    assert validate(ens.schema, res.x) is None


@pytest.mark.parametrize("selection", ["best-bound", "depth-first"])
def test_matches_brute_force(selection):
    cfg = BnbConfig(node_selection=selection)
    for seed in range(20):
        ens = random_instance(InstanceSpec(seed=2000 + seed))
        _, z_star = brute_force_opt(ens)
        res = solve_milp(build_full(ens), cfg)
        assert res.status == "optimal"
        assert res.objective == pytest.approx(z_star, abs=1e-6 * max(1, abs(z_star)))
        assert ens.predict(res.X) == pytest.approx(res.objective, abs=1e-12)


def test_negative_weights_and_leaves():
    for seed in range(10):
        spec = InstanceSpec(n_trees=6, weight_dist=("uniform", -1.5, 1.5),
                            leaf_dist=("normal", -2.0, 3.0), seed=2100 + seed)
        ens = random_instance(spec)
        _, z_star = brute_force_opt(ens)
        res = solve_milp(build_full(ens))
        assert res.objective == pytest.approx(z_star, abs=1e-6 * max(1, abs(z_star)))


def test_incumbent_is_exact_not_lp_arithmetic():
    for seed in range(10):
        ens = random_instance(InstanceSpec(seed=2200 + seed))
        res = solve_milp(build_full(ens))
        # bitwise equality with the ensemble's own accumulation order
        assert res.objective == ens.predict_encoding(res.x)


def test_node_limit_keeps_valid_bounds():
    ens = random_instance(InstanceSpec(n_vars=6, n_trees=10, max_depth=4,
                                       max_split_points=4, seed=7))
    _, z_star = brute_force_opt(ens)
    res = solve_milp(build_full(ens), BnbConfig(node_limit=1))
    assert res.status == "limit-reached"
    assert res.stats["nodes"] <= 1
    assert res.bound >= z_star - 1e-9
    if res.x is not None:
        assert res.objective <= z_star + 1e-9
    full = solve_milp(build_full(ens))
    assert full.status == "optimal"
    assert res.bound >= full.objective - 1e-9


def test_time_limit_zero_budget():
    ens = random_instance(InstanceSpec(n_vars=6, n_trees=10, seed=8))
    _, z_star = brute_force_opt(ens)
    res = solve_milp(build_full(ens), BnbConfig(time_limit=1e-9))
    assert res.status == "limit-reached"
    assert res.bound >= z_star - 1e-9


def test_infeasible_model():
    ens = fixture_ensemble()
    m = build_full(ens)
    tree = ens.trees[0]
    # total leaf mass of tree 0 pinned to 2 contradicts its convexity row
    add_leaf_linear_constraint(m, {(0, int(l)): 1.0 for l in tree.leaves},
                               "==", 2.0, name="impossible")
    res = solve_milp(m)
    assert res.status == "infeasible"
    assert res.x is None and res.X is None
    assert res.objective == -np.inf


def test_initial_incumbent_prunes():
    ens = fixture_ensemble()
    x_opt = encode(ens.schema, [5.0, 2])
    res = solve_milp(build_full(ens), BnbConfig(initial_x=x_opt))
    assert res.status == "optimal"
    assert res.objective == 7.0
    # seeding with the optimum means no integer node can strictly improve it
    assert res.X.tolist() == [5.0, 2.0]


def test_initial_incumbent_must_be_valid():
    ens = fixture_ensemble()
    with pytest.raises(SolveError):
        solve_milp(build_full(ens), BnbConfig(initial_x=np.array([1, 0, 1, 1, 0])))


def test_initial_incumbent_ignored_when_user_rows_cut_it_off():
    ens = fixture_ensemble()
    m = build_full(ens)
    ref = [5.0, 2.0]
    T.add_proximity_constraints(m, T.proximity_vectors(ens, [ref]), cap=0.0)
    res = solve_milp(m, BnbConfig(initial_x=encode(ens.schema, ref)))
    # the seed violates the proximity row, so it must not become the incumbent
    assert res.status == "optimal"
    assert res.objective == pytest.approx(2.0, abs=1e-9)


def test_rel_gap_stops_early_with_honest_bounds():
    ens = random_instance(InstanceSpec(n_vars=6, n_trees=10, max_depth=4, seed=9))
    exact = solve_milp(build_full(ens))
    loose = solve_milp(build_full(ens), BnbConfig(rel_gap=0.5))
    assert loose.status == "optimal"
    assert loose.gap <= 0.5 + 1e-12
    assert loose.objective <= exact.objective + 1e-9
    assert loose.bound >= exact.objective - 1e-9


def test_lazy_generator_rows_are_enforced():
    ens = fixture_ensemble()
    m = build_full(ens)

    vetoed = []

    def no_level_two(x_bits, primal, model, keys):
        # forbid c1 = 2 (bit index 3) the first time it shows up integral
        if x_bits[3] == 1 and ("veto",) not in keys:
            vetoed.append(x_bits.copy())
            return [Row("veto", {3: 1.0}, "<=", 0.0, key=("veto",))]
        return []

    register_lazy(m, no_level_two)
    res = solve_milp(m)
    assert res.status == "optimal"
    assert vetoed, "the generator never fired"
    assert res.x[3] == 0
    # best cell with c1 != 2: v in (2,5] scores 3 + 2*1.5 since tree B
    # routes right of its level split and right of its numeric split
    assert res.objective == pytest.approx(6.0, abs=1e-9)


def test_lazy_generator_via_config_extra():
    ens = fixture_ensemble()

    def no_level_two(x_bits, primal, model, keys):
        if x_bits[3] == 1 and ("veto",) not in keys:
            return [Row("veto", {3: 1.0}, "<=", 0.0, key=("veto",))]
        return []

    res = solve_milp(build_full(ens), BnbConfig(extra_lazy=(no_level_two,)))
    assert res.objective == pytest.approx(6.0, abs=1e-9)


def test_generator_reemitting_a_key_is_an_error():
    ens = fixture_ensemble()
    m = build_full(ens)

    def broken(x_bits, primal, model, keys):
        return [Row("dup", {3: 1.0}, "<=", 0.0, key=("dup",))]

    register_lazy(m, broken)
    with pytest.raises(SolveError, match="re-emitted"):
        solve_milp(m)


def test_generator_returning_satisfied_row_is_an_error():
    ens = fixture_ensemble()
    m = build_full(ens)

    def useless(x_bits, primal, model, keys):
        return [Row("slack_row", {3: 1.0}, "<=", 5.0, key=("loose",))]

    register_lazy(m, useless)
    with pytest.raises(SolveError, match="satisfied"):
        solve_milp(m)


def test_stats_shape():
    ens = fixture_ensemble()
    res = solve_milp(build_full(ens))
    for key in ("nodes", "lp_solves", "lp_iterations", "cuts", "time_s"):
        assert key in res.stats
    assert res.stats["nodes"] >= 1
    assert res.stats["lp_solves"] >= res.stats["nodes"]


def test_selection_strategies_agree_on_value():
    for seed in range(8):
        ens = random_instance(InstanceSpec(n_trees=7, seed=2300 + seed))
        a = solve_milp(build_full(ens), BnbConfig(node_selection="best-bound"))
        b = solve_milp(build_full(ens), BnbConfig(node_selection="depth-first"))
        assert a.objective == pytest.approx(b.objective, abs=1e-9)


def test_unknown_selection_rejected():
    ens = fixture_ensemble()
    with pytest.raises(SolveError):
        solve_milp(build_full(ens), BnbConfig(node_selection="random"))
