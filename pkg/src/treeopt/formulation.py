"""Mixed-integer models over ensemble encodings.

Variables: one binary x bit per encoding column (same layout as the
encoding vector), one continuous y in [0,1] per (tree, leaf), and for
decomposition masters one continuous value variable per tree. The direct
model couples x and y through per-split rows: mass on a split's left
leaves is allowed only when the split's bit sum routes left, and
symmetrically on the right. Restricting which split rows are present
yields the relaxation hierarchy used for truncation and row generation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .trees import Ensemble

LEAF_MODEL = "leaf"
LINEARIZED_MODEL = "linearized"
MASTER_MODEL = "master"


@dataclass
class VarDef:
    name: str
    is_binary: bool
    lb: float
    ub: float


@dataclass
class Row:
    name: str
    coef: dict[int, float]
    sense: str  # "<=" or "=="
    rhs: float
    key: tuple | None = None


class MilpModel:
    """A maximization model plus the ensemble metadata behind its columns."""

    def __init__(self, ensemble: Ensemble, kind: str):
        self.ensemble = ensemble
        self.kind = kind
        self.var_defs: list[VarDef] = []
        self.rows: list[Row] = []
        self._obj: dict[int, float] = {}
        self.x_cols = ensemble.schema.n_bits  # columns [0, n_bits) are the x bits
        self.y_col: dict[tuple[int, int], int] = {}
        self.theta_col: dict[int, int] = {}
        self.active_pairs: frozenset = frozenset()
        self.lazy_generators: list = []
        self.has_user_rows = False
        self._pairs_by_tree: dict[int, list] = {}

    # -- assembly helpers ----------------------------------------------

    def add_var(self, name, is_binary, lb, ub) -> int:
        self.var_defs.append(VarDef(name, is_binary, lb, ub))
        return len(self.var_defs) - 1

    def add_row(self, name, coef, sense, rhs, key=None):
        if sense not in ("<=", "=="):
            raise ConfigError(f"row {name}: sense {sense!r}")
        self.rows.append(Row(name, dict(coef), sense, float(rhs), key))

    def set_objective(self, col: int, value: float):
        if value:
            self._obj[col] = self._obj.get(col, 0.0) + value

    @property
    def n_cols(self) -> int:
        return len(self.var_defs)

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    def objective_vector(self) -> np.ndarray:
        c = np.zeros(self.n_cols)
        for col, v in self._obj.items():
            c[col] = v
        return c

    def binary_cols(self) -> np.ndarray:
        return np.array([k for k, v in enumerate(self.var_defs) if v.is_binary], dtype=np.int64)

    def objective_value(self, values: np.ndarray) -> float:
        return float(sum(v * values[col] for col, v in self._obj.items()))

    # -- exact incumbent evaluation --------------------------------------

    def incumbent_value(self, x_bits: np.ndarray, extra_keys=()) -> float:
        """Exact model objective at an integer x.

        For leaf models the optimal y puts all of a tree's mass on the
        best leaf not excluded by any present split row whose bit sum
        routes away from it; closed form, no LP involved. Masters and
        linearized models have a unique completion at integer x (the
        value variables, resp. the per-leaf rows, pin every tree to its
        reached leaf), so both score as the plain prediction.
        """
        ens = self.ensemble
        if self.kind != LEAF_MODEL:
            return ens.predict_encoding(x_bits)
        extra = self._split_keys_by_tree(extra_keys)
        total = 0.0
        for t, w in enumerate(ens.weights):
            _, val = self._best_allowed_leaf(t, x_bits, extra)
            total += w * val
        return float(total)

    def _split_keys_by_tree(self, extra_keys) -> dict:
        extra: dict[int, list] = {}
        for key in extra_keys:
            if key and key[0] == "split":
                _, t, s, side = key
                extra.setdefault(t, []).append((s, side))
        return extra

    def _best_allowed_leaf(self, t: int, x_bits: np.ndarray, extra: dict):
        """Optimal leaf of tree t at integer x under the present split rows."""
        w = self.ensemble.weights[t]
        tree = self.ensemble.trees[t]
        allowed = np.ones(tree.n_leaves, dtype=bool)
        for s, side in self._pairs_by_tree.get(t, []) + extra.get(t, []):
            route = tree.route_sum(s, x_bits)
            if side == "left" and route == 0:
                allowed[tree.left_leaf_pos(s)] = False
            elif side == "right" and route == 1:
                allowed[tree.right_leaf_pos(s)] = False
        vals = tree.leaf_values()
        masked = np.where(allowed, vals, -np.inf if w >= 0 else np.inf)
        pos = int(np.argmax(masked)) if w >= 0 else int(np.argmin(masked))
        return int(tree.leaves[pos]), float(vals[pos])

    def completion_primal(self, x_bits: np.ndarray, extra_keys=()) -> np.ndarray:
        """Deterministic optimal primal completion at an integer x.

        Leaf models put each tree's unit mass on the best leaf no present
        (or extra-keyed) split row excludes; linearized models pin every
        indicator to the reached leaf; masters pin each value variable to
        its tree's routed value.
        """
        ens = self.ensemble
        primal = np.zeros(self.n_cols)
        primal[: self.x_cols] = x_bits
        if self.kind == MASTER_MODEL:
            for t, tree in enumerate(ens.trees):
                primal[self.theta_col[t]] = float(tree.value[tree.leaf_for(x_bits)])
            return primal
        if self.kind == LEAF_MODEL:
            extra = self._split_keys_by_tree(extra_keys)
            for t in range(ens.n_trees):
                leaf, _ = self._best_allowed_leaf(t, x_bits, extra)
                primal[self.y_col[(t, leaf)]] = 1.0
            return primal
        for t, tree in enumerate(ens.trees):
            primal[self.y_col[(t, tree.leaf_for(x_bits))]] = 1.0
        return primal


def _add_x_columns(model: MilpModel):
    schema = model.ensemble.schema
    for i in range(schema.n_vars):
        for j in range(schema.n_bits_of(i)):
            model.add_var(f"x[{i}][{j}]", is_binary=True, lb=0.0, ub=1.0)


def _add_x_side_rows(model: MilpModel):
    """Ladder rows for numeric bits, one-hot rows for categorical bits."""
    schema = model.ensemble.schema
    for i, v in enumerate(schema.variables):
        k = schema.n_bits_of(i)
        if k == 0:
            continue
        base = schema.bit_offset(i)
        if v.kind == "numeric":
            for j in range(k - 1):
                model.add_row(
                    f"ladder[{i}][{j}]", {base + j: 1.0, base + j + 1: -1.0}, "<=", 0.0
                )
        else:
            model.add_row(f"onehot[{i}]", {base + j: 1.0 for j in range(k)}, "==", 1.0)


def split_row(model: MilpModel, t: int, s: int, side: str) -> Row:
    """One side of a split's routing constraint as a model row."""
    tree = model.ensemble.trees[t]
    bits = tree.split_bits[s]
    name = f"{side}[{t}][{tree.orig_id[s]}]"
    if side == "left":
        coef = {model.y_col[(t, int(l))]: 1.0 for l in tree.left_leaves(s)}
        for b in bits:
            coef[int(b)] = coef.get(int(b), 0.0) - 1.0
        return Row(name, coef, "<=", 0.0, key=("split", t, int(s), "left"))
    coef = {model.y_col[(t, int(l))]: 1.0 for l in tree.right_leaves(s)}
    for b in bits:
        coef[int(b)] = coef.get(int(b), 0.0) + 1.0
    return Row(name, coef, "<=", 1.0, key=("split", t, int(s), "right"))


def build_restricted(ensemble: Ensemble, pairs) -> MilpModel:
    """Direct model carrying only the given (tree, split, side) rows.

    With every pair present this is the exact formulation; with fewer rows
    it is a relaxation whose optimum can only move up.
    """
    model = MilpModel(ensemble, LEAF_MODEL)
    _add_x_columns(model)
    for t, tree in enumerate(ensemble.trees):
        w = ensemble.weights[t]
        for l in tree.leaves:
            col = model.add_var(f"y[{t}][{tree.orig_id[l]}]", is_binary=False, lb=0.0, ub=1.0)
            model.y_col[(t, int(l))] = col
            model.set_objective(col, w * float(tree.value[l]))
    for t, tree in enumerate(ensemble.trees):
        model.add_row(
            f"conv[{t}]",
            {model.y_col[(t, int(l))]: 1.0 for l in tree.leaves},
            "==",
            1.0,
        )
    norm_pairs = sorted((int(t), int(s), side) for (t, s, side) in pairs)
    by_tree: dict[int, list] = {}
    for t, s, side in norm_pairs:
        if side not in ("left", "right"):
            raise ConfigError(f"split row side {side!r}")
        model.rows.append(split_row(model, t, s, side))
        by_tree.setdefault(t, []).append((s, side))
    _add_x_side_rows(model)
    model.active_pairs = frozenset(("split", t, s, side) for t, s, side in norm_pairs)
    model._pairs_by_tree = by_tree
    return model


def all_split_pairs(ensemble: Ensemble, max_depth: int | None = None):
    pairs = []
    for t, tree in enumerate(ensemble.trees):
        for s in tree.splits:
            if max_depth is None or tree.depth[s] <= max_depth:
                pairs.append((t, int(s), "left"))
                pairs.append((t, int(s), "right"))
    return pairs


def build_full(ensemble: Ensemble) -> MilpModel:
    """Exact direct model: every split contributes both routing rows."""
    return build_restricted(ensemble, all_split_pairs(ensemble))


def build_truncated(ensemble: Ensemble, depth: int) -> MilpModel:
    """Routing rows only for splits at depth <= `depth` (root depth is 1)."""
    if depth < 0:
        raise ConfigError("truncation depth must be >= 0")
    return build_restricted(ensemble, all_split_pairs(ensemble, max_depth=depth))


def build_standard_linearization(ensemble: Ensemble) -> MilpModel:
    """Per-leaf product linearization of the same objective.

    Each leaf's indicator is bounded above by every ancestor's routing
    sum (or its complement) and below by their sum minus (count - 1);
    no per-tree convexity row.
    """
    model = MilpModel(ensemble, LINEARIZED_MODEL)
    _add_x_columns(model)
    for t, tree in enumerate(ensemble.trees):
        w = ensemble.weights[t]
        for l in tree.leaves:
            col = model.add_var(f"y[{t}][{tree.orig_id[l]}]", is_binary=False, lb=0.0, ub=1.0)
            model.y_col[(t, int(l))] = col
            model.set_objective(col, w * float(tree.value[l]))
    for t, tree in enumerate(ensemble.trees):
        for l in tree.leaves:
            l = int(l)
            ycol = model.y_col[(t, l)]
            ls, rs = tree.ls[l], tree.rs[l]
            lower = {ycol: -1.0}
            for s in ls:
                coef = {ycol: 1.0}
                for b in tree.split_bits[s]:
                    coef[int(b)] = coef.get(int(b), 0.0) - 1.0
                model.add_row(f"up_l[{t}][{tree.orig_id[l]}][{tree.orig_id[s]}]", coef, "<=", 0.0)
                for b in tree.split_bits[s]:
                    lower[int(b)] = lower.get(int(b), 0.0) + 1.0
            for s in rs:
                coef = {ycol: 1.0}
                for b in tree.split_bits[s]:
                    coef[int(b)] = coef.get(int(b), 0.0) + 1.0
                model.add_row(f"up_r[{t}][{tree.orig_id[l]}][{tree.orig_id[s]}]", coef, "<=", 1.0)
                for b in tree.split_bits[s]:
                    lower[int(b)] = lower.get(int(b), 0.0) - 1.0
            # y >= sum(on-path routing terms) - (count - 1), written as <=.
            model.add_row(
                f"low[{t}][{tree.orig_id[l]}]", lower, "<=", float(len(ls)) - 1.0
            )
    _add_x_side_rows(model)
    return model


# -- truncation error bound ----------------------------------------------


@dataclass(frozen=True)
class TruncationBound:
    """A-priori cap on how far a depth-truncated optimum can overshoot."""

    depth: int
    per_tree: tuple[float, ...]
    total: float


def truncation_bound(ensemble: Ensemble, depth: int) -> TruncationBound:
    """Worst-case overshoot of the depth-truncated model.

    For each tree, the largest within-branch prediction range over its
    splits at exactly the boundary depth; weighted sum over trees. Valid
    sandwich: truncated optimum - total <= exact optimum <= truncated
    optimum. Weights are sign-normalized first.
    """
    if depth < 1:
        raise ConfigError("truncation depth must be >= 1")
    ens = ensemble.with_nonnegative_weights()
    per_tree = []
    for tree in ens.trees:
        worst = 0.0
        for s in tree.splits:
            if tree.depth[s] != depth:
                continue
            l, r = tree.left[s], tree.right[s]
            spread = max(
                tree.sub_max[l] - tree.sub_min[l], tree.sub_max[r] - tree.sub_min[r]
            )
            worst = max(worst, float(spread))
        per_tree.append(worst)
    total = float(np.dot(ens.weights, per_tree))
    return TruncationBound(depth=depth, per_tree=tuple(per_tree), total=total)


# -- user rows over leaf indicators ---------------------------------------


def add_leaf_linear_constraint(model: MilpModel, coeffs, sense: str, rhs: float, name: str):
    """Append an arbitrary linear row over (tree, leaf) indicator variables."""
    row = {}
    for (t, l), c in coeffs.items():
        row[model.y_col[(t, int(l))]] = float(c)
    model.add_row(name, row, sense, rhs)
    model.has_user_rows = True


def leaf_indicator(ensemble: Ensemble, X) -> dict[tuple[int, int], float]:
    """Which leaf each tree routes the raw point to, as a 0/1 coefficient map."""
    from .encoding import encode

    x = encode(ensemble.schema, X)
    return {(t, tree.leaf_for(x)): 1.0 for t, tree in enumerate(ensemble.trees)}


def proximity_vectors(ensemble: Ensemble, points) -> list[dict[tuple[int, int], float]]:
    return [leaf_indicator(ensemble, X) for X in points]


def add_proximity_constraints(model: MilpModel, vectors, cap: float):
    """Cap the fraction of trees agreeing with each reference point."""
    T = model.ensemble.n_trees
    for m, vec in enumerate(vectors):
        add_leaf_linear_constraint(
            model, {k: v / T for k, v in vec.items()}, "<=", cap, name=f"prox[{m}]"
        )


def proximity(ensemble: Ensemble, Xa, Xb) -> float:
    """Fraction of trees routing the two points to the same leaf."""
    from .encoding import encode

    xa = encode(ensemble.schema, Xa)
    xb = encode(ensemble.schema, Xb)
    same = sum(1 for t in ensemble.trees if t.leaf_for(xa) == t.leaf_for(xb))
    return same / ensemble.n_trees


# -- text export -----------------------------------------------------------


def export_lp_text(model: MilpModel, path):
    """Write the model in LP text format with full-precision coefficients."""

    def fmt(v: float) -> str:
        return f"{v:.17g}"

    def term(col: int, c: float, first: bool) -> str:
        name = model.var_defs[col].name
        sign = "" if (first and c >= 0) else ("+ " if c >= 0 else "- ")
        return f"{sign}{fmt(abs(c))} {name}"

    lines = ["Maximize", " obj:"]
    first = True
    for col, c in sorted(model._obj.items()):
        lines.append("  " + term(col, c, first))
        first = False
    if first:
        lines.append("  0 " + model.var_defs[0].name if model.var_defs else "  0")
    lines.append("Subject To")
    for row in model.rows:
        parts = []
        first = True
        for col in sorted(row.coef):
            c = row.coef[col]
            if c == 0.0:
                continue
            parts.append(term(col, c, first))
            first = False
        sense = "<=" if row.sense == "<=" else "="
        lines.append(f" {row.name}: " + " ".join(parts) + f" {sense} {fmt(row.rhs)}")
    lines.append("Bounds")
    for k, v in enumerate(model.var_defs):
        if not v.is_binary:
            lo = fmt(v.lb) if math.isfinite(v.lb) else "-inf"
            hi = fmt(v.ub) if math.isfinite(v.ub) else "+inf"
            lines.append(f" {lo} <= {v.name} <= {hi}")
    binaries = [v.name for v in model.var_defs if v.is_binary]
    if binaries:
        lines.append("Binaries")
        lines.append(" " + " ".join(binaries))
    lines.append("End")
    text = "\n".join(lines) + "\n"
    if hasattr(path, "write"):
        path.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)
    return text
