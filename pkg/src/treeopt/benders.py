"""Decomposition with one value variable per tree.

The master model keeps only the binary encoding columns plus a bounded
value variable per tree; all routing structure lives in lazily added
cuts. At an integer master point each tree's subproblem is solved by
walking the tree, and an explicit dual certificate of that subproblem
turns into a cut whenever the master overestimates the tree's value.
Weights are sign-normalized up front so every cut direction is valid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bnb import BnbConfig, SolveResult, solve_milp
from .formulation import MASTER_MODEL, MilpModel, Row, _add_x_columns, _add_x_side_rows
from .trees import Ensemble, Tree

CUT_TOL = 1e-6


@dataclass(frozen=True)
class DualCertificate:
    """Dual solution of one tree's routing subproblem at a fixed leaf.

    alpha is keyed by the ancestor splits the leaf lies right of, beta by
    those it lies left of; gamma is the leaf's value. Feasibility needs
    gamma + sum(alpha over LS(l)) + sum(beta over RS(l)) >= value(l) for
    every leaf l, and at any encoding routing to this leaf the objective
    collapses to gamma.
    """

    leaf: int
    alpha: dict
    beta: dict
    gamma: float

    def objective_at(self, tree: Tree, x: np.ndarray) -> float:
        total = self.gamma
        for s, a in self.alpha.items():
            total += a * tree.route_sum(s, x)
        for s, b in self.beta.items():
            total += b * (1 - tree.route_sum(s, x))
        return float(total)

    def feasibility_margin(self, tree: Tree) -> float:
        """min over leaves of (dual row lhs - leaf value); >= 0 iff feasible."""
        worst = np.inf
        for l in tree.leaves:
            lhs = self.gamma
            lhs += sum(self.alpha.get(s, 0.0) for s in tree.ls[int(l)])
            lhs += sum(self.beta.get(s, 0.0) for s in tree.rs[int(l)])
            worst = min(worst, lhs - tree.value[l])
        return float(worst)


def subproblem_value(tree: Tree, x: np.ndarray) -> tuple[float, int]:
    """Optimal routing value of one tree at a valid integer encoding."""
    leaf = tree.leaf_for(x)
    return float(tree.value[leaf]), leaf


def dual_certificate(tree: Tree, leaf: int) -> DualCertificate:
    p = float(tree.value[leaf])
    alpha = {}
    beta = {}
    for s in tree.rs[leaf]:  # leaf sits right of s; cap the left branch
        a = float(tree.sub_max[tree.left[s]]) - p
        if a > 0.0:
            alpha[int(s)] = a
    for s in tree.ls[leaf]:  # leaf sits left of s; cap the right branch
        b = float(tree.sub_max[tree.right[s]]) - p
        if b > 0.0:
            beta[int(s)] = b
    return DualCertificate(leaf=int(leaf), alpha=alpha, beta=beta, gamma=p)


def cut_row(model: MilpModel, t: int, leaf: int) -> Row:
    """Cut capping tree t's value variable, from the leaf's certificate.

    theta_t <= gamma + sum_s alpha_s h_s + sum_s beta_s (1 - h_s) with
    h_s the split's bit sum, rearranged to keep variables on the left.
    """
    tree = model.ensemble.trees[t]
    cert = dual_certificate(tree, leaf)
    coef = {model.theta_col[t]: 1.0}
    rhs = cert.gamma
    for s, a in cert.alpha.items():
        for b in tree.split_bits[s]:
            coef[int(b)] = coef.get(int(b), 0.0) - a
    for s, bv in cert.beta.items():
        rhs += bv
        for b in tree.split_bits[s]:
            coef[int(b)] = coef.get(int(b), 0.0) + bv
    name = f"cut[{t}][{tree.orig_id[leaf]}]"
    return Row(name, coef, "<=", rhs, key=("benders", t, int(leaf)))


def _generator(x_int, primal, model, keys):
    rows = []
    for t, tree in enumerate(model.ensemble.trees):
        p, leaf = subproblem_value(tree, x_int)
        theta = primal[model.theta_col[t]]
        if theta <= p + CUT_TOL * max(1.0, abs(p)):
            continue
        key = ("benders", t, int(leaf))
        if key in keys:
            continue  # row already present; the excess is LP noise
        rows.append(cut_row(model, t, int(leaf)))
    return rows


def build_master(ensemble: Ensemble) -> MilpModel:
    ens = ensemble.with_nonnegative_weights()
    model = MilpModel(ens, MASTER_MODEL)
    _add_x_columns(model)
    for t, tree in enumerate(ens.trees):
        vals = tree.leaf_values()
        col = model.add_var(f"tv[{t}]", is_binary=False, lb=float(vals.min()), ub=float(vals.max()))
        model.theta_col[t] = col
        model.set_objective(col, float(ens.weights[t]))
    _add_x_side_rows(model)
    model.lazy_generators.append(_generator)
    return model


def solve_benders(ensemble: Ensemble, config: BnbConfig | None = None) -> SolveResult:
    return solve_milp(build_master(ensemble), config)
