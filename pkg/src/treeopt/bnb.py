"""Branch and bound over the binary encoding columns.

Nodes solve warm-started LP relaxations; branching fixes one bit and
propagates the encoding structure (setting a ladder bit drags every
higher bit with it, picking a one-hot level clears its siblings).
Registered lazy generators run at every integer-feasible node: returned
rows are appended to that node's LP (children inherit them), and a point
becomes the incumbent only once no generator objects. Incumbent
objectives are recomputed exactly from the model's closed form, never
read off LP arithmetic.
"""

from __future__ import annotations

import heapq
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import simplex
from .encoding import cell_bounds, decode, validate
from .errors import SolveError
from .formulation import MASTER_MODEL, MilpModel
from .simplex import model_arrays, solve_arrays

BEST_BOUND = "best-bound"
DEPTH_FIRST = "depth-first"


@dataclass(frozen=True)
class BnbConfig:
    rel_gap: float = 1e-6
    abs_gap: float = 1e-9
    int_tol: float = 1e-6
    time_limit: float = 0.0  # seconds; 0 disables
    node_limit: int = 0  # 0 disables
    node_selection: str = BEST_BOUND
    branching: str = "most-fractional"
    initial_x: object = None  # binary encoding to seed the incumbent
    extra_lazy: tuple = ()


@dataclass
class SolveResult:
    status: str  # optimal | limit-reached | infeasible
    objective: float  # exact incumbent value (lower bound)
    bound: float  # best proven upper bound
    gap: float
    x: np.ndarray | None
    X: np.ndarray | None
    cells: list | None
    primal: np.ndarray | None  # full LP column values at the accepting node
    stats: dict = field(default_factory=dict)


class _Node:
    __slots__ = ("bound", "depth", "seq", "lb", "ub", "rows", "keys", "basis", "vstat")

    def __init__(self, bound, depth, seq, lb, ub, rows, keys, basis, vstat):
        self.bound = bound
        self.depth = depth
        self.seq = seq
        self.lb = lb
        self.ub = ub
        self.rows = rows
        self.keys = keys
        self.basis = basis
        self.vstat = vstat

    def __lt__(self, other):  # heapq fallback; ordering fixed by the push key
        return self.seq < other.seq


def register_lazy(model: MilpModel, generator):
    """Hook a row generator: generator(x_bits, primal, model, node_keys) -> [Row]."""
    model.lazy_generators.append(generator)
    return generator


def solve_milp(model: MilpModel, config: BnbConfig | None = None) -> SolveResult:
    return _Bnb(model, config or BnbConfig()).run()


class _Bnb:
    def __init__(self, model, config):
        self.model = model
        self.config = config
        if config.node_selection not in (BEST_BOUND, DEPTH_FIRST):
            raise SolveError(f"unknown node selection {config.node_selection!r}")
        if config.branching != "most-fractional":
            raise SolveError(f"unknown branching rule {config.branching!r}")
        self.A0, self.b0, self.eq0, self.c, self.lb0, self.ub0 = model_arrays(model)
        self.n = model.n_cols
        self.bits = model.x_cols  # binary columns are exactly [0, x_cols)
        self.gens = list(model.lazy_generators) + list(config.extra_lazy)
        self.schema = model.ensemble.schema
        self._owners()
        self.stats = {"nodes": 0, "lp_solves": 0, "lp_iterations": 0, "cuts": {}}
        self.z_lb = -math.inf
        self.inc_x = None
        self.inc_primal = None
        self.seq = 0

    def _owners(self):
        schema = self.schema
        self.owner_var = np.zeros(self.bits, dtype=np.int64)
        self.owner_j = np.zeros(self.bits, dtype=np.int64)
        self.var_offset = {}
        self.var_nbits = {}
        self.var_kind = {}
        for i in range(schema.n_vars):
            k = schema.n_bits_of(i)
            if k == 0:
                continue
            off = schema.bit_offset(i)
            self.var_offset[i] = off
            self.var_nbits[i] = k
            self.var_kind[i] = schema.variables[i].kind
            self.owner_var[off : off + k] = i
            self.owner_j[off : off + k] = np.arange(k)

    # -- helpers ---------------------------------------------------------

    def _slack(self, z):
        if not math.isfinite(z):
            return 0.0
        return max(self.config.abs_gap * max(1.0, abs(z)), self.config.rel_gap * abs(z))

    def _solve_node_lp(self, node):
        blocks = [self.A0]
        b, eq = self.b0, self.eq0
        if node.rows:
            A_add = np.zeros((len(node.rows), self.n))
            b_add = np.zeros(len(node.rows))
            eq_add = np.zeros(len(node.rows), dtype=bool)
            for k, row in enumerate(node.rows):
                for col, cv in row.coef.items():
                    A_add[k, col] = cv
                b_add[k] = row.rhs
                eq_add[k] = row.sense == "=="
            blocks = [self.A0, A_add]
            b = np.concatenate([self.b0, b_add])
            eq = np.concatenate([self.eq0, eq_add])
        warm = (node.basis, node.vstat) if node.basis is not None else None
        res = solve_arrays(blocks, b, eq, self.c, node.lb, node.ub, warm=warm)
        self.stats["lp_solves"] += 1
        self.stats["lp_iterations"] += res.iterations
        return res

    def _accept(self, x_int, keys, primal):
        exact = self.model.incumbent_value(x_int, keys)
        if exact > self.z_lb:
            self.z_lb = exact
            self.inc_x = x_int.copy()
            self.inc_primal = None if primal is None else primal.copy()

    def _branch_children(self, node, col, frac_bound):
        i = int(self.owner_var[col])
        j = int(self.owner_j[col])
        off, k = self.var_offset[i], self.var_nbits[i]
        children = []
        for value in (0, 1):
            lb = node.lb.copy()
            ub = node.ub.copy()
            lb[col] = ub[col] = float(value)
            if self.var_kind[i] == "numeric":
                if value == 1:
                    lb[off + j : off + k] = 1.0
                else:
                    ub[off : off + j + 1] = 0.0
            else:
                if value == 1:
                    sib = np.arange(off, off + k)
                    sib = sib[sib != col]
                    ub[sib] = 0.0
            if np.any(lb > ub):
                continue
            self.seq += 1
            children.append(
                _Node(frac_bound, node.depth + 1, self.seq, lb, ub, node.rows, node.keys,
                      node.basis, node.vstat)
            )
        return children

    def _validate_new_rows(self, rows, primal, keys):
        for row in rows:
            if row.key is None or row.key in keys:
                raise SolveError(f"lazy generator re-emitted row {row.name}")
            lhs = sum(cv * primal[col] for col, cv in row.coef.items())
            tol = 1e-7 * max(1.0, abs(row.rhs))
            viol = lhs - row.rhs if row.sense == "<=" else abs(lhs - row.rhs)
            if viol <= tol:
                raise SolveError(f"lazy generator returned satisfied row {row.name}")

    # -- main loop ---------------------------------------------------------

    def _digest_seed(self, x0):
        """Run the generators to quiescence on the seed's completion primal.

        Emitted rows join the root relaxation either way; the seed only
        becomes the incumbent if the settled completion satisfies every
        row generated under it, since a row cut away from under the seed
        voids the value the restricted model assigned it.
        """
        if not self.gens:
            self._accept(x0, frozenset(), None)
            return (), frozenset()
        rows: list = []
        keys: set = set()
        for _ in range(1000):
            primal = self.model.completion_primal(x0, keys)
            fresh = []
            for gen in self.gens:
                fresh.extend(gen(x0, primal, self.model, frozenset(keys)) or [])
            if not fresh:
                if all(self._row_holds(row, primal) for row in rows):
                    self._accept(x0, frozenset(keys), None)
                return tuple(rows), frozenset(keys)
            for row in fresh:
                if row.key is None or row.key in keys:
                    raise SolveError(f"lazy generator re-emitted row {row.name}")
                keys.add(row.key)
                rows.append(row)
        raise SolveError("row generation on the seed failed to settle")

    @staticmethod
    def _row_holds(row, primal) -> bool:
        lhs = sum(cv * primal[col] for col, cv in row.coef.items())
        tol = 1e-9 * max(1.0, abs(row.rhs))
        if row.sense == "==":
            return abs(lhs - row.rhs) <= tol
        return lhs <= row.rhs + tol

    def run(self) -> SolveResult:
        t0 = time.perf_counter()
        cfg = self.config
        seed_rows, seed_keys = (), frozenset()
        if cfg.initial_x is not None:
            x0 = np.asarray(cfg.initial_x, dtype=np.int8)
            if validate(self.schema, x0) is not None:
                raise SolveError("initial incumbent encoding is invalid")
            if self._initial_feasible(x0):
                seed_rows, seed_keys = self._digest_seed(x0)

        root = _Node(math.inf, 0, 0, self.lb0.copy(), self.ub0.copy(),
                     seed_rows, seed_keys, None, None)
        use_heap = cfg.node_selection == BEST_BOUND
        heap: list = []
        stack: list = []
        if use_heap:
            heapq.heappush(heap, (-root.bound, root.seq, root))
        else:
            stack.append(root)
        status = "optimal"
        gap_stop_ub = None

        while heap or stack:
            if cfg.time_limit and time.perf_counter() - t0 > cfg.time_limit:
                status = "limit-reached"
                break
            if cfg.node_limit and self.stats["nodes"] >= cfg.node_limit:
                status = "limit-reached"
                break
            node = heapq.heappop(heap)[2] if use_heap else stack.pop()
            if math.isfinite(self.z_lb) and node.bound <= self.z_lb + self._slack(self.z_lb):
                continue
            z_ub = self._global_bound(heap, stack, node)
            if math.isfinite(self.z_lb) and z_ub - self.z_lb <= self._slack(z_ub):
                gap_stop_ub = z_ub
                break
            self.stats["nodes"] += 1
            for ch in self._process(node, t0):
                if use_heap:
                    heapq.heappush(heap, (-ch.bound, ch.seq, ch))
                else:
                    stack.append(ch)

        open_nodes = [n for _, _, n in heap] + stack
        if gap_stop_ub is not None:
            z_ub = gap_stop_ub
        elif open_nodes:
            z_ub = max([self.z_lb] + [n.bound for n in open_nodes])
        else:
            z_ub = self.z_lb
        return self._result(status, z_ub, t0)

    def _global_bound(self, heap, stack, node):
        best = node.bound
        if heap:
            best = max(best, -heap[0][0])
        for n in stack:
            best = max(best, n.bound)
        return max(best, self.z_lb)

    def _process(self, node, t0):
        cfg = self.config
        while True:
            if cfg.time_limit and time.perf_counter() - t0 > cfg.time_limit:
                return [node]  # requeue so its bound stays in the open set
            res = self._solve_node_lp(node)
            if res.status == "infeasible":
                return []
            if res.status != "optimal":
                raise SolveError(f"node LP ended {res.status}")
            node.basis, node.vstat = res.basis, res.vstat
            node.bound = min(node.bound, res.objective)
            if math.isfinite(self.z_lb) and node.bound <= self.z_lb + self._slack(self.z_lb):
                return []

            bits = res.x[: self.bits] if self.bits else np.zeros(0)
            frac = np.abs(bits - np.rint(bits))
            if self.bits and frac.max() > cfg.int_tol:
                col = int(np.argmin(np.abs(bits - 0.5) + np.where(frac <= cfg.int_tol, 1e9, 0.0)))
                return self._branch_children(node, col, node.bound)

            x_int = np.rint(bits).astype(np.int8)
            if validate(self.schema, x_int) is not None:
                raise SolveError("integer node violates the encoding structure")
            new_rows = []
            for gen in self.gens:
                out = gen(x_int, res.x, self.model, node.keys)
                if out:
                    new_rows.extend(out)
            if not new_rows:
                self._accept(x_int, node.keys, res.x)
                return []
            self._validate_new_rows(new_rows, res.x, node.keys)
            for row in new_rows:
                kind = row.key[0]
                self.stats["cuts"][kind] = self.stats["cuts"].get(kind, 0) + 1
            m_old = len(self.b0) + len(node.rows)
            node.rows = node.rows + tuple(new_rows)
            node.keys = node.keys | {row.key for row in new_rows}
            if node.basis is not None:
                extra = np.arange(self.n + m_old, self.n + m_old + len(new_rows), dtype=np.int64)
                node.basis = np.concatenate([node.basis, extra])
                node.vstat = np.concatenate(
                    [node.vstat, np.full(len(new_rows), simplex.BASIC, dtype=np.int8)]
                )

    def _initial_feasible(self, x0) -> bool:
        """User rows can exclude a seed; everything else admits any valid x."""
        if not self.model.has_user_rows or self.model.kind == MASTER_MODEL:
            return True
        ens = self.model.ensemble
        ycols = {}
        for t, tree in enumerate(ens.trees):
            ycols[self.model.y_col[(t, tree.leaf_for(x0))]] = 1.0
        for row in self.model.rows:
            lhs = sum(cv * (x0[col] if col < self.bits else ycols.get(col, 0.0))
                      for col, cv in row.coef.items())
            if row.sense == "==" and abs(lhs - row.rhs) > 1e-9:
                return False
            if row.sense == "<=" and lhs > row.rhs + 1e-9:
                return False
        return True

    def _result(self, status, z_ub, t0):
        self.stats["time_s"] = time.perf_counter() - t0
        if self.inc_x is None:
            final = "infeasible" if status == "optimal" else status
            return SolveResult(final, -math.inf, z_ub, math.inf, None, None, None, None, self.stats)
        z_ub = max(z_ub, self.z_lb)
        gap = (z_ub - self.z_lb) / max(abs(z_ub), 1e-10)
        X = decode(self.schema, self.inc_x)
        cells = cell_bounds(self.schema, self.inc_x)
        return SolveResult(
            status=status,
            objective=self.z_lb,
            bound=z_ub,
            gap=gap,
            x=self.inc_x,
            X=X,
            cells=cells,
            primal=self.inc_primal,
            stats=self.stats,
        )
