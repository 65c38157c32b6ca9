"""Tree-ensemble model core: variable schema, immutable trees, collapsing.

A model is a weighted sum of binary decision trees over numeric variables
(split by "X_i <= a" queries against a finite set of thresholds) and
categorical variables (split by "X_i in C" queries over levels 1..K).
Trees are stored as flat arrays with precomputed structural queries
(leaf sets per split, ancestor splits per leaf, subtree value ranges)
that the optimization layers lean on. Everything here is immutable
after construction and safe to share across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DomainError, LoadError

NUMERIC = "numeric"
CATEGORICAL = "categorical"


@dataclass(frozen=True)
class Variable:
    """One input variable; numeric variables carry their ordered thresholds."""

    name: str
    kind: str
    split_points: tuple[float, ...] = ()
    n_levels: int = 0


class VariableSchema:
    """Variable declarations plus the binary-encoding layout.

    Each active numeric variable contributes one bit per threshold
    (bit j set <=> X_i <= a_j, so bits form a nondecreasing ladder);
    each active categorical variable contributes a one-hot bit per level.
    Variables never split on are inactive and own no bits.
    """

    def __init__(self, variables, active=None):
        variables = tuple(variables)
        if active is None:
            active = tuple(
                (v.kind == NUMERIC and len(v.split_points) > 0) or v.kind == CATEGORICAL
                for v in variables
            )
        self.variables = variables
        self.active = tuple(bool(a) for a in active)
        self._validate()
        offsets = []
        pos = 0
        for i, v in enumerate(variables):
            offsets.append(pos)
            pos += self.n_bits_of(i)
        self._offsets = tuple(offsets)
        self.n_bits = pos

    def _validate(self):
        seen = set()
        for i, v in enumerate(self.variables):
            if v.kind not in (NUMERIC, CATEGORICAL):
                raise LoadError("bad-variable", f"variable {i}: unknown kind {v.kind!r}")
            if not v.name or v.name in seen:
                raise LoadError("bad-variable", f"variable {i}: missing or duplicate name")
            seen.add(v.name)
            if v.kind == NUMERIC:
                pts = v.split_points
                if any(not math.isfinite(a) for a in pts):
                    raise LoadError("bad-variable", f"variable {i}: nonfinite split point")
                if any(pts[j] >= pts[j + 1] for j in range(len(pts) - 1)):
                    raise LoadError(
                        "bad-variable", f"variable {i}: split points not strictly increasing"
                    )
                if v.n_levels:
                    raise LoadError("bad-variable", f"variable {i}: numeric with levels")
            else:
                if v.n_levels < 1:
                    raise LoadError("bad-variable", f"variable {i}: categorical needs levels >= 1")
                if v.split_points:
                    raise LoadError("bad-variable", f"variable {i}: categorical with split points")

    @property
    def n_vars(self) -> int:
        return len(self.variables)

    def is_active(self, i: int) -> bool:
        return self.active[i]

    def n_bits_of(self, i: int) -> int:
        if not self.active[i]:
            return 0
        v = self.variables[i]
        return len(v.split_points) if v.kind == NUMERIC else v.n_levels

    def bit_offset(self, i: int) -> int:
        return self._offsets[i]

    def bit_index(self, i: int, j: int) -> int:
        """Global column of bit j (0-based) of variable i."""
        return self._offsets[i] + j

    def bit_owner(self, col: int) -> tuple[int, int]:
        """Inverse of bit_index."""
        for i in range(self.n_vars):
            k = self.n_bits_of(i)
            if self._offsets[i] <= col < self._offsets[i] + k:
                return i, col - self._offsets[i]
        raise IndexError(col)

    def validate_input(self, X) -> np.ndarray:
        """Check a raw input vector against the variable domains."""
        X = np.asarray(X, dtype=float)
        if X.shape != (self.n_vars,):
            raise DomainError(f"expected {self.n_vars} values, got shape {X.shape}")
        for i, v in enumerate(self.variables):
            xi = X[i]
            if not math.isfinite(xi):
                raise DomainError(f"variable {v.name}: nonfinite value")
            if v.kind == CATEGORICAL:
                if xi != int(xi) or not (1 <= int(xi) <= v.n_levels):
                    raise DomainError(
                        f"variable {v.name}: level {xi} outside 1..{v.n_levels}"
                    )
        return X


class Tree:
    """One decision tree, validated and flattened into arrays.

    Node ids from the source document are remapped to 0..n-1 in sorted
    order; `orig_id` keeps the source ids for reporting. Split nodes on
    numeric variables store the threshold's index into the schema's
    split points; categorical splits store the 0-based level set.
    """

    def __init__(self, raw_nodes, schema: VariableSchema):
        self._build(list(raw_nodes), schema)

    # -- construction -------------------------------------------------

    def _build(self, records, schema):
        if not records:
            raise LoadError("empty-tree", "tree has no nodes")
        by_id = {}
        for rec in records:
            if not isinstance(rec, dict) or "id" not in rec:
                raise LoadError("bad-node-record", f"node record {rec!r}")
            nid = rec["id"]
            if not isinstance(nid, int) or isinstance(nid, bool):
                raise LoadError("bad-node-record", f"node id {nid!r} is not an integer")
            if nid in by_id:
                raise LoadError("duplicate-node-id", f"node id {nid} appears twice")
            by_id[nid] = rec
        order = sorted(by_id)
        idx_of = {nid: k for k, nid in enumerate(order)}
        n = len(order)

        self.n_nodes = n
        self.orig_id = np.array(order, dtype=np.int64)
        self.is_split = np.zeros(n, dtype=bool)
        self.var = np.full(n, -1, dtype=np.int32)
        self.thr_idx = np.full(n, -1, dtype=np.int32)
        self.thr_val = np.full(n, np.nan)
        self.left = np.full(n, -1, dtype=np.int32)
        self.right = np.full(n, -1, dtype=np.int32)
        self.parent = np.full(n, -1, dtype=np.int32)
        self.value = np.full(n, np.nan)
        self.cset: list = [None] * n
        self.cset_set: list = [None] * n

        for nid, rec in by_id.items():
            k = idx_of[nid]
            kind = rec.get("kind")
            if kind == "leaf":
                if "value" not in rec:
                    raise LoadError("missing-leaf-value", f"leaf {nid} has no value")
                val = float(rec["value"])
                if not math.isfinite(val):
                    raise LoadError("nonfinite-leaf-value", f"leaf {nid} value {val}")
                self.value[k] = val
            elif kind == "split":
                self.is_split[k] = True
                self._fill_split(k, nid, rec, by_id, idx_of, schema)
            else:
                raise LoadError("bad-node-kind", f"node {nid} kind {kind!r}")

        self._link_and_scan(schema)

    def _fill_split(self, k, nid, rec, by_id, idx_of, schema):
        for side in ("left", "right"):
            child = rec.get(side)
            if child is None or child not in by_id:
                raise LoadError("missing-child", f"split {nid}: {side} child {child!r}")
        if rec["left"] == nid or rec["right"] == nid or rec["left"] == rec["right"]:
            raise LoadError("bad-children", f"split {nid}: children must be two other nodes")
        self.left[k] = idx_of[rec["left"]]
        self.right[k] = idx_of[rec["right"]]

        var = rec.get("var")
        if not isinstance(var, int) or isinstance(var, bool) or not (0 <= var < schema.n_vars):
            raise LoadError("unknown-variable", f"split {nid}: variable {var!r}")
        self.var[k] = var
        decl = schema.variables[var]
        if decl.kind == NUMERIC:
            if "level_set" in rec:
                raise LoadError("split-kind-mismatch", f"split {nid}: level set on numeric variable")
            if "threshold" not in rec:
                raise LoadError("missing-threshold", f"split {nid} has no threshold")
            thr = float(rec["threshold"])
            if not math.isfinite(thr):
                raise LoadError("nonfinite-threshold", f"split {nid} threshold {thr}")
            try:
                j = decl.split_points.index(thr)
            except ValueError:
                raise LoadError(
                    "threshold-not-in-schema",
                    f"split {nid}: threshold {thr!r} not declared for {decl.name}",
                ) from None
            self.thr_idx[k] = j
            self.thr_val[k] = thr
        else:
            if "threshold" in rec:
                raise LoadError("split-kind-mismatch", f"split {nid}: threshold on categorical variable")
            levels = rec.get("level_set")
            if not levels:
                raise LoadError("empty-level-set", f"split {nid} has no level set")
            lv = sorted(set(int(l) for l in levels))
            if any(not (1 <= l <= decl.n_levels) for l in lv):
                raise LoadError("level-out-of-range", f"split {nid}: levels {levels}")
            if len(lv) >= decl.n_levels:
                raise LoadError(
                    "full-level-set",
                    f"split {nid}: level set covers the whole domain of {decl.name}",
                )
            self.cset[k] = np.array([l - 1 for l in lv], dtype=np.int32)
            self.cset_set[k] = frozenset(l - 1 for l in lv)

    def _link_and_scan(self, schema):
        n = self.n_nodes
        referenced = np.zeros(n, dtype=np.int32)
        for k in range(n):
            if self.is_split[k]:
                for c in (self.left[k], self.right[k]):
                    referenced[c] += 1
                    if referenced[c] > 1:
                        raise LoadError(
                            "multiple-parents", f"node {self.orig_id[c]} has several parents"
                        )
                    self.parent[c] = k
        roots = np.flatnonzero(referenced == 0)
        if len(roots) == 0:
            raise LoadError("no-root", "every node has a parent (cycle)")
        if len(roots) > 1:
            ids = [int(self.orig_id[r]) for r in roots]
            raise LoadError("multiple-roots", f"nodes {ids} all lack parents")
        self.root = int(roots[0])

        # Top-down pass: depth (root = 1) and the ancestor splits of each
        # leaf, partitioned by which side of the split the leaf lies on.
        self.depth = np.zeros(n, dtype=np.int32)
        ls: dict[int, tuple] = {}
        rs: dict[int, tuple] = {}
        seen = 0
        stack = [(self.root, 1, (), ())]
        while stack:
            k, d, on_left_of, on_right_of = stack.pop()
            self.depth[k] = d
            seen += 1
            if self.is_split[k]:
                stack.append((int(self.right[k]), d + 1, on_left_of, on_right_of + (k,)))
                stack.append((int(self.left[k]), d + 1, on_left_of + (k,), on_right_of))
            else:
                ls[k] = on_left_of
                rs[k] = on_right_of
        if seen != n:
            raise LoadError("unreachable-node", f"{n - seen} nodes unreachable from the root")

        self.leaves = np.flatnonzero(~self.is_split).astype(np.int32)
        self.splits = np.flatnonzero(self.is_split).astype(np.int32)
        self.leaf_pos = np.full(n, -1, dtype=np.int32)
        self.leaf_pos[self.leaves] = np.arange(len(self.leaves), dtype=np.int32)
        self.ls = ls
        self.rs = rs
        self.max_split_depth = int(self.depth[self.splits].max()) if len(self.splits) else 0

        # Bottom-up pass (children always have larger depth): subtree leaf
        # lists and subtree value ranges.
        sub_leaves: list = [None] * n
        self.sub_min = np.full(n, np.nan)
        self.sub_max = np.full(n, np.nan)
        for k in sorted(range(n), key=lambda q: -self.depth[q]):
            if self.is_split[k]:
                l, r = self.left[k], self.right[k]
                sub_leaves[k] = np.concatenate([sub_leaves[l], sub_leaves[r]])
                self.sub_min[k] = min(self.sub_min[l], self.sub_min[r])
                self.sub_max[k] = max(self.sub_max[l], self.sub_max[r])
            else:
                sub_leaves[k] = np.array([k], dtype=np.int32)
                self.sub_min[k] = self.sub_max[k] = self.value[k]
        self._sub_leaves = sub_leaves
        self.split_bits: dict[int, np.ndarray] = {}  # global bit columns, filled by assemble()

    # -- structural queries -------------------------------------------

    @property
    def n_leaves(self) -> int:
        return len(self.leaves)

    def subtree_leaves(self, node: int) -> np.ndarray:
        return self._sub_leaves[node]

    def left_leaves(self, s: int) -> np.ndarray:
        return self._sub_leaves[self.left[s]]

    def right_leaves(self, s: int) -> np.ndarray:
        return self._sub_leaves[self.right[s]]

    def left_leaf_pos(self, s: int) -> np.ndarray:
        return self.leaf_pos[self.left_leaves(s)]

    def right_leaf_pos(self, s: int) -> np.ndarray:
        return self.leaf_pos[self.right_leaves(s)]

    def leaf_values(self) -> np.ndarray:
        return self.value[self.leaves]

    # -- traversal ----------------------------------------------------

    def route_sum(self, s: int, x: np.ndarray) -> int:
        """Sum of the encoding bits queried by split s (1 routes left)."""
        return int(x[self.split_bits[s]].sum())

    def leaf_for(self, x: np.ndarray) -> int:
        """Leaf reached from the root under a valid binary encoding x."""
        k = self.root
        while self.is_split[k]:
            k = int(self.left[k]) if self.route_sum(k, x) == 1 else int(self.right[k])
        return k

    def predict_raw(self, X: np.ndarray, schema: VariableSchema) -> float:
        """Evaluate on a raw input vector by comparing against thresholds."""
        k = self.root
        while self.is_split[k]:
            v = self.var[k]
            if schema.variables[v].kind == NUMERIC:
                go_left = X[v] <= self.thr_val[k]
            else:
                go_left = (int(X[v]) - 1) in self.cset_set[k]
            k = int(self.left[k]) if go_left else int(self.right[k])
        return float(self.value[k])

    def to_raw(self, schema: VariableSchema) -> list[dict]:
        """Reconstruct the document form (original node ids, 1-based levels)."""
        out = []
        for k in range(self.n_nodes):
            if self.is_split[k]:
                rec = {
                    "id": int(self.orig_id[k]),
                    "kind": "split",
                    "var": int(self.var[k]),
                    "left": int(self.orig_id[self.left[k]]),
                    "right": int(self.orig_id[self.right[k]]),
                }
                if self.cset[k] is None:
                    rec["threshold"] = float(self.thr_val[k])
                else:
                    rec["level_set"] = [int(l) + 1 for l in self.cset[k]]
            else:
                rec = {"id": int(self.orig_id[k]), "kind": "leaf", "value": float(self.value[k])}
            out.append(rec)
        return out


class Ensemble:
    """Weighted collection of trees over a shared schema."""

    def __init__(self, trees, weights, schema: VariableSchema):
        self.trees = tuple(trees)
        self.weights = np.asarray(weights, dtype=float)
        self.schema = schema

    @property
    def n_trees(self) -> int:
        return len(self.trees)

    @property
    def n_leaves(self) -> int:
        return sum(t.n_leaves for t in self.trees)

    @property
    def n_levels(self) -> int:
        return self.schema.n_bits

    @property
    def max_split_depth(self) -> int:
        return max((t.max_split_depth for t in self.trees), default=0)

    def predict(self, X) -> float:
        X = self.schema.validate_input(X)
        return float(
            sum(w * t.predict_raw(X, self.schema) for w, t in zip(self.weights, self.trees))
        )

    def predict_encoding(self, x: np.ndarray) -> float:
        return float(
            sum(w * t.value[t.leaf_for(x)] for w, t in zip(self.weights, self.trees))
        )

    def batch_predict(self, X: np.ndarray) -> np.ndarray:
        """Vectorized predict over the rows of X (validated once)."""
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.schema.n_vars:
            raise DomainError(f"expected (batch, {self.schema.n_vars}) matrix")
        out = np.zeros(len(X))
        for w, t in zip(self.weights, self.trees):
            if w == 0.0:
                continue
            node = np.full(len(X), t.root, dtype=np.int32)
            while True:
                open_rows = np.flatnonzero(t.is_split[node])
                if len(open_rows) == 0:
                    break
                for k in np.unique(node[open_rows]):
                    rows = open_rows[node[open_rows] == k]
                    v = t.var[k]
                    if t.cset[k] is None:
                        go_left = X[rows, v] <= t.thr_val[k]
                    else:
                        go_left = np.isin(X[rows, v].astype(np.int64) - 1, t.cset[k])
                    node[rows] = np.where(go_left, t.left[k], t.right[k])
            out += w * t.value[node]
        return out

    def with_nonnegative_weights(self) -> "Ensemble":
        """Equivalent ensemble with weights >= 0 (leaf values flipped as needed)."""
        if np.all(self.weights >= 0):
            return self
        trees = []
        for w, t in zip(self.weights, self.trees):
            if w >= 0:
                trees.append(t)
            else:
                raw = t.to_raw(self.schema)
                for rec in raw:
                    if rec["kind"] == "leaf":
                        rec["value"] = -rec["value"]
                flipped = Tree(raw, self.schema)
                flipped.split_bits = t.split_bits
                trees.append(flipped)
        return Ensemble(trees, np.abs(self.weights), self.schema)


def _used_variables(raw_trees):
    """Scan raw trees for the referenced variables and numeric thresholds."""
    used: dict[int, dict] = {}
    for nodes in raw_trees:
        for rec in nodes:
            if not isinstance(rec, dict) or rec.get("kind") != "split":
                continue
            var = rec.get("var")
            if not isinstance(var, int) or isinstance(var, bool):
                raise LoadError("unknown-variable", f"split variable {var!r}")
            slot = used.setdefault(var, {"thresholds": set(), "categorical": False})
            if "level_set" in rec:
                slot["categorical"] = True
            elif "threshold" in rec:
                thr = float(rec["threshold"])
                if not math.isfinite(thr):
                    raise LoadError("nonfinite-threshold", f"threshold {thr}")
                slot["thresholds"].add(thr)
    return used


def assemble(raw_trees, weights, variables=None) -> Ensemble:
    """Build a validated Ensemble from document-form trees.

    When `variables` is omitted the schema is inferred from the splits
    themselves (numeric variables only: every threshold set that appears
    becomes the variable's split points).
    """
    raw_trees = list(raw_trees)
    if not raw_trees:
        raise LoadError("empty-ensemble", "no trees")
    weights = np.asarray(list(weights), dtype=float)
    if len(weights) != len(raw_trees):
        raise LoadError("weight-count-mismatch", f"{len(weights)} weights, {len(raw_trees)} trees")
    if not np.all(np.isfinite(weights)):
        raise LoadError("nonfinite-weight", "weights must be finite")

    used = _used_variables(raw_trees)
    if variables is None:
        if any(slot["categorical"] for slot in used.values()):
            raise LoadError(
                "cannot-infer-categorical",
                "categorical splits need an explicit variable declaration",
            )
        n_vars = max(used) + 1 if used else 0
        variables = [
            Variable(
                name=f"x{i + 1}",
                kind=NUMERIC,
                split_points=tuple(sorted(used.get(i, {"thresholds": ()})["thresholds"])),
            )
            for i in range(n_vars)
        ]
    variables = tuple(variables)
    active = []
    for i, v in enumerate(variables):
        if i in used:
            slot = used[i]
            if slot["categorical"] and v.kind != CATEGORICAL:
                raise LoadError("split-kind-mismatch", f"level-set split on numeric {v.name}")
            if slot["thresholds"] and v.kind != NUMERIC:
                raise LoadError("split-kind-mismatch", f"threshold split on categorical {v.name}")
            active.append(True)
        else:
            active.append(False)
    schema = VariableSchema(variables, active)

    trees = [Tree(nodes, schema) for nodes in raw_trees]
    for t in trees:
        for s in t.splits:
            s = int(s)
            v = int(t.var[s])
            base = schema.bit_offset(v)
            if t.cset[s] is None:
                bits = np.array([base + int(t.thr_idx[s])], dtype=np.int64)
            else:
                bits = base + t.cset[s].astype(np.int64)
            t.split_bits[s] = bits
    return Ensemble(trees, weights, schema)


# -- tree collapsing ---------------------------------------------------


def _interval_has_grid_point(grid: np.ndarray, lo: float, hi: float) -> bool:
    """Any grid value inside the half-open interval (lo, hi]?"""
    if hi < lo:
        return False
    k = np.searchsorted(grid, lo, side="right")
    return k < len(grid) and grid[k] <= hi


def _var_index(schema: VariableSchema, key) -> int:
    """Variables may be addressed by index or by name."""
    if isinstance(key, str):
        for i, v in enumerate(schema.variables):
            if v.name == key:
                return i
        raise ConfigError(f"unknown variable {key!r}")
    i = int(key)
    if not (0 <= i < schema.n_vars):
        raise ConfigError(f"variable index {key} out of range")
    return i


def collapse_tree(tree: Tree, schema: VariableSchema, fixed=None, grids=None) -> list[dict]:
    """Simplify a tree under fixed variables and restricted value grids.

    Splits decided by a fixed variable are replaced by the reachable child;
    branches whose implied region contains no allowed value are pruned.
    Keys of `fixed` and `grids` are variable names or indices. Returns
    document-form nodes; prediction is unchanged on the restricted domain.
    """
    fixed = {_var_index(schema, k): v for k, v in (fixed or {}).items()}
    grids = {_var_index(schema, k): v for k, v in (grids or {}).items()}
    both = set(fixed) & set(grids)
    if both:
        names = sorted(schema.variables[i].name for i in both)
        raise ConfigError(f"variables {names} both fixed and gridded")
    num_grids = {}
    cat_allowed = {}
    for i, vals in grids.items():
        decl = schema.variables[i]
        if decl.kind == NUMERIC:
            arr = np.unique(np.asarray(list(vals), dtype=float))
            if len(arr) == 0 or not np.all(np.isfinite(arr)):
                raise ConfigError(f"grid for {decl.name} must be finite and nonempty")
            num_grids[i] = arr
        else:
            levels = frozenset(int(l) - 1 for l in vals)
            if not levels or any(not (0 <= l < decl.n_levels) for l in levels):
                raise ConfigError(f"grid for {decl.name} outside its levels")
            cat_allowed[i] = levels
    for i, val in fixed.items():
        decl = schema.variables[i]
        if decl.kind == CATEGORICAL:
            lv = int(val)
            if not (1 <= lv <= decl.n_levels):
                raise ConfigError(f"fixed level {val} outside domain of {decl.name}")
        elif not math.isfinite(float(val)):
            raise ConfigError(f"fixed value for {decl.name} must be finite")

    out: list[dict] = []

    def emit(rec) -> int:
        rec["id"] = len(out)
        out.append(rec)
        return rec["id"]

    def walk(k: int, lo: dict, hi: dict, allowed: dict) -> int:
        if not tree.is_split[k]:
            return emit({"kind": "leaf", "value": float(tree.value[k])})
        v = int(tree.var[k])
        decl = schema.variables[v]
        if decl.kind == NUMERIC:
            if v in fixed:
                child = tree.left[k] if fixed[v] <= tree.thr_val[k] else tree.right[k]
                return walk(int(child), lo, hi, allowed)
            a = float(tree.thr_val[k])
            cur_lo = lo.get(v, -math.inf)
            cur_hi = hi.get(v, math.inf)
            if v in num_grids:
                grid = num_grids[v]
                left_ok = _interval_has_grid_point(grid, cur_lo, min(cur_hi, a))
                right_ok = _interval_has_grid_point(grid, max(cur_lo, a), cur_hi)
            else:
                left_ok = a > cur_lo
                right_ok = a < cur_hi
            if left_ok and right_ok:
                lchild = walk(int(tree.left[k]), lo, {**hi, v: min(cur_hi, a)}, allowed)
                rchild = walk(int(tree.right[k]), {**lo, v: max(cur_lo, a)}, hi, allowed)
                return emit(
                    {"kind": "split", "var": v, "threshold": a, "left": lchild, "right": rchild}
                )
            child = tree.left[k] if left_ok else tree.right[k]
            return walk(int(child), lo, hi, allowed)
        # categorical
        cs = tree.cset_set[k]
        if v in fixed:
            child = tree.left[k] if (int(fixed[v]) - 1) in cs else tree.right[k]
            return walk(int(child), lo, hi, allowed)
        cur = allowed.get(v)
        if cur is None:
            cur = cat_allowed.get(v, frozenset(range(decl.n_levels)))
        left_set = cur & cs
        right_set = cur - cs
        if left_set and right_set:
            lchild = walk(int(tree.left[k]), lo, hi, {**allowed, v: left_set})
            rchild = walk(int(tree.right[k]), lo, hi, {**allowed, v: right_set})
            return emit(
                {
                    "kind": "split",
                    "var": v,
                    "level_set": [int(l) + 1 for l in sorted(cs)],
                    "left": lchild,
                    "right": rchild,
                }
            )
        child = tree.left[k] if left_set else tree.right[k]
        return walk(int(child), lo, hi, {**allowed, v: cur})

    walk(tree.root, {}, {}, {})
    return out


def collapse_ensemble(ensemble: Ensemble, fixed=None, grids=None) -> Ensemble:
    """Collapse every tree; variables that vanish from all splits go inactive."""
    raw = [collapse_tree(t, ensemble.schema, fixed, grids) for t in ensemble.trees]
    return assemble(raw, ensemble.weights, ensemble.schema.variables)
