"""Value-variable decomposition: duals, cuts, end-to-end exactness."""

import numpy as np
import pytest

import treeopt as T
from treeopt.benders import (
    build_master,
    cut_row,
    dual_certificate,
    solve_benders,
    subproblem_value,
)
from treeopt.encoding import encode
from treeopt.oracle import InstanceSpec, brute_force_opt, cell_representatives, random_instance
from treeopt.simplex import solve_lp

from test_trees import fixture_ensemble, sample_points


def one_tree_lp(ens, t, x):
    """LP value of tree t's routing polytope at a pinned encoding."""
    single = T.Ensemble([ens.trees[t]], [1.0], ens.schema)
    m = T.build_full(single)
    pins = {col: (float(x[col]), float(x[col])) for col in range(m.x_cols)}
    return solve_lp(m, bound_overrides=pins)


def test_subproblem_value_is_the_walk():
    ens = fixture_ensemble()
    x = encode(ens.schema, [3.0, 2])
    v, leaf = subproblem_value(ens.trees[0], x)
    assert v == 3.0
    assert int(ens.trees[0].orig_id[leaf]) == 4


def test_certificates_are_dual_feasible_and_tight():
    rng = np.random.default_rng(21)
    checked = 0
    for seed in range(12):
        ens = random_instance(InstanceSpec(n_vars=5, n_trees=5, max_depth=4,
                                           categorical_fraction=0.4, seed=3000 + seed))
        for t, tree in enumerate(ens.trees):
            for leaf in tree.leaves:
                cert = dual_certificate(tree, int(leaf))
                assert cert.feasibility_margin(tree) >= -1e-9
                assert cert.gamma == tree.value[leaf]
                assert all(a > 0 for a in cert.alpha.values())
                assert all(b > 0 for b in cert.beta.values())
            for X in sample_points(ens.schema, rng, 4):
                x = encode(ens.schema, X)
                v, leaf = subproblem_value(tree, x)
                cert = dual_certificate(tree, leaf)
                # strong duality at the reached leaf
                assert cert.objective_at(tree, x) == pytest.approx(v, abs=1e-9)
                # weak duality everywhere else
                for other in tree.leaves:
                    oc = dual_certificate(tree, int(other))
                    assert oc.objective_at(tree, x) >= v - 1e-9
                checked += 1
    assert checked >= 200


def test_certificate_matches_subproblem_lp():
    rng = np.random.default_rng(22)
    for seed in range(6):
        ens = random_instance(InstanceSpec(n_vars=4, n_trees=3, seed=3100 + seed))
        for X in sample_points(ens.schema, rng, 5):
            x = encode(ens.schema, X)
            for t, tree in enumerate(ens.trees):
                lp = one_tree_lp(ens, t, x)
                v, _ = subproblem_value(tree, x)
                assert lp.status == "optimal"
                assert lp.objective == pytest.approx(v, abs=1e-8 * max(1, abs(v)))


def test_master_shape():
    ens = fixture_ensemble()
    m = build_master(ens)
    assert m.n_cols == 5 + 2
    assert m.n_rows == 2  # ladder + one-hot only; routing arrives lazily
    for t, tree in enumerate(m.ensemble.trees):
        col = m.theta_col[t]
        assert m.var_defs[col].lb == tree.leaf_values().min()
        assert m.var_defs[col].ub == tree.leaf_values().max()
    c = m.objective_vector()
    assert c[m.theta_col[0]] == 1.0 and c[m.theta_col[1]] == 2.0


def test_cut_row_structure():
    ens = fixture_ensemble()
    m = build_master(ens)
    tree = ens.trees[0]
    # leaf with original id 4 lies left of the root and right of the inner split
    leaf = list(tree.orig_id).index(4)
    row = cut_row(m, 0, leaf)
    assert row.key == ("benders", 0, leaf)
    assert row.sense == "<="
    assert row.coef[m.theta_col[0]] == 1.0
    cert = dual_certificate(tree, leaf)
    assert row.rhs == pytest.approx(cert.gamma + sum(cert.beta.values()))
    # cut is valid at every cell and tight at cells reaching the leaf
    rng = np.random.default_rng(5)
    for X in sample_points(ens.schema, rng, 30):
        x = encode(ens.schema, X)
        lhs_bits = sum(c * x[col] for col, c in row.coef.items() if col < m.x_cols)
        v, reached = subproblem_value(tree, x)
        assert v + lhs_bits <= row.rhs + 1e-9
        if reached == leaf:
            assert v + lhs_bits == pytest.approx(row.rhs, abs=1e-9)


def test_matches_brute_force():
    for seed in range(20):
        ens = random_instance(InstanceSpec(seed=3200 + seed))
        _, z_star = brute_force_opt(ens)
        res = solve_benders(ens)
        assert res.status == "optimal"
        assert res.objective == pytest.approx(z_star, abs=1e-6 * max(1, abs(z_star)))
        assert ens.predict(res.X) == pytest.approx(res.objective, abs=1e-12)


def test_negative_weights_are_normalized():
    for seed in range(10):
        spec = InstanceSpec(n_trees=6, weight_dist=("uniform", -2.0, 1.0),
                            seed=3300 + seed)
        ens = random_instance(spec)
        _, z_star = brute_force_opt(ens)
        res = solve_benders(ens)
        assert res.objective == pytest.approx(z_star, abs=1e-6 * max(1, abs(z_star)))


def test_cut_counts_are_reproducible():
    ens = random_instance(InstanceSpec(seed=3))
    res = solve_benders(ens)
    assert res.status == "optimal"
    assert res.objective == 0.7369083338798569
    assert res.stats["cuts"] == {"benders": 11}
    assert res.stats["nodes"] == 7
    again = solve_benders(ens)
    assert again.objective == res.objective
    assert again.stats["cuts"] == res.stats["cuts"]
    assert again.stats["nodes"] == res.stats["nodes"]


def test_single_leaf_trees():
    # a bare-leaf tree contributes a constant; certificates are trivial
    leaf_only = [{"id": 0, "kind": "leaf", "value": 2.5}]
    split = [
        {"id": 0, "kind": "split", "var": 0, "threshold": 1.0, "left": 1, "right": 2},
        {"id": 1, "kind": "leaf", "value": 1.0},
        {"id": 2, "kind": "leaf", "value": -1.0},
    ]
    ens = T.assemble([leaf_only, split], [3.0, 1.0],
                     (T.Variable("v1", "numeric", split_points=(1.0,)),))
    cert = dual_certificate(ens.trees[0], int(ens.trees[0].leaves[0]))
    assert cert.alpha == {} and cert.beta == {} and cert.gamma == 2.5
    res = solve_benders(ens)
    assert res.objective == 3.0 * 2.5 + 1.0
    assert res.X[0] <= 1.0


def test_vertex_cover_instances_solved_exactly():
    import itertools

    from test_oracle import graph_catalog

    for n, edges, _name in graph_catalog():
        if n > 6:
            continue
        ens = T.vertex_cover_instance(n, edges)
        res = solve_benders(ens)
        want = -T.min_vertex_cover_size(n, edges)
        assert res.objective == pytest.approx(want, abs=1e-9)
