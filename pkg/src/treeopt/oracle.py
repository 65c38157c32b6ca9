"""Ground-truth utilities: exhaustive optimization, reductions, generators.

The brute-force optimizer enumerates the finite cell decomposition the
encoding induces and is the reference every solve path is tested against.
The vertex-cover construction maps a graph to an ensemble whose optimum
is exactly minus the minimum cover size.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, LoadError
from .trees import CATEGORICAL, NUMERIC, Ensemble, Variable, assemble

ENUMERATION_CAP = 1_000_000


def cell_representatives(schema) -> list[np.ndarray]:
    """Per-variable canonical values, one per encodable cell.

    Numeric: each threshold plus one value past the last (the decode
    representatives); categorical: every level. Inactive variables get a
    single placeholder since they cannot move any prediction.
    """
    out = []
    for i, v in enumerate(schema.variables):
        if not schema.is_active(i):
            out.append(np.array([0.0 if v.kind == NUMERIC else 1.0]))
        elif v.kind == NUMERIC:
            pts = np.asarray(v.split_points)
            out.append(np.append(pts, pts[-1] + 1.0))
        else:
            out.append(np.arange(1, v.n_levels + 1, dtype=float))
    return out


def brute_force_opt(ensemble: Ensemble, cap: int = ENUMERATION_CAP) -> tuple[np.ndarray, float]:
    """Maximize by enumerating every cell; ties keep the lexicographically
    first cell in representative order."""
    reps = cell_representatives(ensemble.schema)
    n_cells = 1
    for r in reps:
        n_cells *= len(r)
    if n_cells > cap:
        raise ConfigError(f"{n_cells} cells exceeds the enumeration cap {cap}")

    best_val = -math.inf
    best_X = None
    chunk = 65536
    buf = []
    for combo in itertools.product(*reps):
        buf.append(combo)
        if len(buf) == chunk:
            best_val, best_X = _scan_chunk(ensemble, buf, best_val, best_X)
            buf = []
    if buf:
        best_val, best_X = _scan_chunk(ensemble, buf, best_val, best_X)
    return best_X, float(best_val)


def _scan_chunk(ensemble, rows, best_val, best_X):
    X = np.array(rows)
    vals = ensemble.batch_predict(X)
    k = int(np.argmax(vals))
    if vals[k] > best_val:
        return float(vals[k]), X[k].copy()
    return best_val, best_X


# -- vertex cover reduction ---------------------------------------------


def read_edge_list(path) -> tuple[int, list[tuple[int, int]]]:
    """Parse "u v" pairs, one per line, 1-indexed; vertex count is the max index."""
    edges = []
    n = 0
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 2:
                raise LoadError("bad-edge-line", f"line {lineno}: {line!r}")
            try:
                u, v = int(parts[0]), int(parts[1])
            except ValueError:
                raise LoadError("bad-edge-line", f"line {lineno}: {line!r}") from None
            if u < 1 or v < 1:
                raise LoadError("bad-edge-line", f"line {lineno}: vertices are 1-indexed")
            if u == v:
                raise LoadError("self-loop", f"line {lineno}: {u}-{v}")
            edges.append((min(u, v), max(u, v)))
            n = max(n, u, v)
    return n, sorted(set(edges))


def vertex_cover_instance(n_vertices: int, edges) -> Ensemble:
    """Ensemble whose maximum equals -(minimum vertex cover size).

    One unit-penalty tree per vertex charges for picking it; one tree per
    edge charges n+1 whenever both endpoints are left out, so any optimal
    solution covers every edge. All weights are -1; picking vertex i means
    X_i > 0.5.
    """
    edges = sorted(set((min(u, v), max(u, v)) for u, v in edges))
    for u, v in edges:
        if u == v:
            raise ConfigError(f"self-loop {u}-{v}")
        if not (1 <= u <= n_vertices and 1 <= v <= n_vertices):
            raise ConfigError(f"edge {u}-{v} outside 1..{n_vertices}")
    variables = [
        Variable(name=f"v{i}", kind=NUMERIC, split_points=(0.5,)) for i in range(1, n_vertices + 1)
    ]
    raw_trees = []
    for i in range(n_vertices):
        raw_trees.append(
            [
                {"id": 0, "kind": "split", "var": i, "threshold": 0.5, "left": 1, "right": 2},
                {"id": 1, "kind": "leaf", "value": 0.0},
                {"id": 2, "kind": "leaf", "value": 1.0},
            ]
        )
    penalty = float(n_vertices + 1)
    for u, v in edges:
        raw_trees.append(
            [
                {"id": 0, "kind": "split", "var": u - 1, "threshold": 0.5, "left": 1, "right": 2},
                {"id": 1, "kind": "split", "var": v - 1, "threshold": 0.5, "left": 3, "right": 4},
                {"id": 2, "kind": "leaf", "value": 0.0},
                {"id": 3, "kind": "leaf", "value": penalty},
                {"id": 4, "kind": "leaf", "value": 0.0},
            ]
        )
    weights = [-1.0] * len(raw_trees)
    return assemble(raw_trees, weights, variables)


def min_vertex_cover_size(n_vertices: int, edges) -> int:
    """Exhaustive minimum vertex cover, for cross-checking the reduction."""
    edges = list(set((min(u, v), max(u, v)) for u, v in edges))
    if not edges:
        return 0
    for size in range(0, n_vertices + 1):
        for combo in itertools.combinations(range(1, n_vertices + 1), size):
            chosen = set(combo)
            if all(u in chosen or v in chosen for u, v in edges):
                return size
    raise AssertionError("unreachable")


# -- random instances ----------------------------------------------------


@dataclass(frozen=True)
class InstanceSpec:
    """Shape parameters for a reproducible random instance."""

    n_vars: int = 4
    n_trees: int = 5
    max_depth: int = 3
    max_split_points: int = 3
    categorical_fraction: float = 0.25
    max_levels: int = 4
    leaf_dist: tuple = ("normal", 0.0, 1.0)
    weight_dist: tuple = ("uniform", 0.5, 1.5)
    leaf_prob: float = 0.3
    seed: int = 0


def _draw(rng: np.random.Generator, dist: tuple, size=None):
    kind, *params = dist
    if kind == "normal":
        return rng.normal(params[0], params[1], size=size)
    if kind == "uniform":
        return rng.uniform(params[0], params[1], size=size)
    if kind == "constant":
        return np.full(size if size is not None else (), float(params[0]))
    raise ConfigError(f"unknown distribution {dist!r}")


def random_instance(spec: InstanceSpec) -> Ensemble:
    """Sample an ensemble; identical specs produce identical models."""
    if spec.n_vars < 1 or spec.n_trees < 1 or spec.max_depth < 1:
        raise ConfigError("n_vars, n_trees, max_depth must be positive")
    if spec.max_split_points < 1 or spec.max_levels < 2:
        raise ConfigError("need at least one split point and two levels")
    rng = np.random.default_rng(np.random.SeedSequence(spec.seed))

    kinds = [
        CATEGORICAL if rng.random() < spec.categorical_fraction else NUMERIC
        for _ in range(spec.n_vars)
    ]
    pools = []
    for kind in kinds:
        if kind == NUMERIC:
            k = int(rng.integers(1, spec.max_split_points + 1))
            pts = np.unique(np.round(rng.uniform(0.0, 10.0, size=k), 6))
            pools.append(pts)
        else:
            pools.append(int(rng.integers(2, spec.max_levels + 1)))

    def grow(depth: int, nodes: list) -> int:
        make_leaf = depth > spec.max_depth or (depth > 1 and rng.random() < spec.leaf_prob)
        if make_leaf:
            val = float(_draw(rng, spec.leaf_dist))
            nodes.append({"id": len(nodes), "kind": "leaf", "value": val})
            return nodes[-1]["id"]
        var = int(rng.integers(spec.n_vars))
        rec = {"id": None, "kind": "split", "var": var}
        if kinds[var] == NUMERIC:
            rec["threshold"] = float(pools[var][rng.integers(len(pools[var]))])
        else:
            k = pools[var]
            size = int(rng.integers(1, k))
            rec["level_set"] = sorted(rng.choice(k, size=size, replace=False) + 1)
            rec["level_set"] = [int(l) for l in rec["level_set"]]
        left = grow(depth + 1, nodes)
        right = grow(depth + 1, nodes)
        rec["id"] = len(nodes)
        rec["left"], rec["right"] = left, right
        nodes.append(rec)
        return rec["id"]

    raw_trees = []
    for _ in range(spec.n_trees):
        nodes: list = []
        grow(1, nodes)
        raw_trees.append(nodes)
    weights = _draw(rng, spec.weight_dist, size=spec.n_trees)

    variables = []
    for i, kind in enumerate(kinds):
        if kind == NUMERIC:
            used = sorted(
                {
                    rec["threshold"]
                    for nodes in raw_trees
                    for rec in nodes
                    if rec["kind"] == "split" and rec["var"] == i
                }
            )
            variables.append(Variable(name=f"x{i + 1}", kind=NUMERIC, split_points=tuple(used)))
        else:
            variables.append(Variable(name=f"x{i + 1}", kind=CATEGORICAL, n_levels=pools[i]))
    return assemble(raw_trees, weights, variables)
