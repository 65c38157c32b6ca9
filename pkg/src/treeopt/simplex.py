"""Dense bounded-variable revised simplex.

Maximizes c.x over {A x + s = b} with finite bounds on structural
variables; each row owns one slack (free-above for <=, fixed at 0 for ==).
Phase 1 minimizes total bound violation with the same pivot machinery
(costs +-1 on infeasible basics, kink-aware ratio test), so any basis is
a legal warm start. Pricing scores reduced costs against static column
norms and falls back to Bland's rule after a run of degenerate pivots.
The basis inverse is kept as an LU factorization plus product-form
updates, refactorized periodically. All tie-breaks are by lowest index,
so identical inputs pivot identically.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, lu_factor, lu_solve

from .errors import SolveError

AT_LB, AT_UB, BASIC = 0, 1, 2

FEAS_TOL = 1e-7
OPT_TOL = 1e-7
PIV_TOL = 1e-9
DEGEN_TOL = 1e-9


@dataclass
class LpResult:
    status: str  # optimal | infeasible | iteration-limit | unbounded
    objective: float
    x: np.ndarray
    duals: np.ndarray
    reduced_costs: np.ndarray
    basis: np.ndarray
    vstat: np.ndarray
    iterations: int


class _Tableau:
    """Solver state over block-structured rows (base block + appended rows)."""

    def __init__(self, blocks, b, eq, c, lb, ub, feas_tol, opt_tol, refactor_every):
        self.blocks = [np.ascontiguousarray(B, dtype=float) for B in blocks if B.shape[0]]
        self.offsets = []
        pos = 0
        for B in self.blocks:
            self.offsets.append(pos)
            pos += B.shape[0]
        self.m = pos
        self.n = len(c)
        self.N = self.n + self.m
        self.b = np.asarray(b, dtype=float)
        self.eq = np.asarray(eq, dtype=bool)
        self.c = np.zeros(self.N)
        self.c[: self.n] = c
        self.lb = np.concatenate([lb, np.zeros(self.m)])
        self.ub = np.concatenate([ub, np.where(self.eq, 0.0, np.inf)])
        self.feas_tol = feas_tol * max(1.0, float(np.abs(self.b).max()) if self.m else 1.0)
        self.opt_tol = opt_tol
        self.refactor_every = refactor_every

        norms = np.full(self.N, 2.0)
        acc = np.ones(self.n)
        for B in self.blocks:
            acc += (B * B).sum(axis=0)
        norms[: self.n] = acc
        self.colnorm2 = norms

        self.basis = np.arange(self.n, self.N, dtype=np.int64)
        self.vstat = np.full(self.N, AT_LB, dtype=np.int8)
        self.vstat[self.basis] = BASIC
        self.val = np.zeros(self.N)
        self.val[: self.n] = self.lb[: self.n]
        self.lu = None
        self.etas: list = []

    # -- linear algebra -------------------------------------------------

    def col(self, j: int) -> np.ndarray:
        out = np.zeros(self.m)
        if j < self.n:
            for off, B in zip(self.offsets, self.blocks):
                out[off : off + B.shape[0]] = B[:, j]
        else:
            out[j - self.n] = 1.0
        return out

    def matvec_struct(self, x: np.ndarray) -> np.ndarray:
        out = np.zeros(self.m)
        for off, B in zip(self.offsets, self.blocks):
            out[off : off + B.shape[0]] = B @ x
        return out

    def price(self, pi: np.ndarray, costs: np.ndarray) -> np.ndarray:
        d = costs.copy()
        for off, B in zip(self.offsets, self.blocks):
            d[: self.n] -= B.T @ pi[off : off + B.shape[0]]
        d[self.n :] -= pi
        return d

    def refactor(self):
        Bmat = np.empty((self.m, self.m))
        for k, j in enumerate(self.basis):
            Bmat[:, k] = self.col(int(j))
        try:
            self.lu = lu_factor(Bmat)
        except (LinAlgError, ValueError) as exc:
            raise SolveError(f"singular basis: {exc}") from exc
        diag = np.abs(np.diag(self.lu[0]))
        if diag.min(initial=np.inf) < 1e-12:
            raise SolveError("singular basis: zero pivot in LU")
        self.etas = []

    def ftran(self, v: np.ndarray) -> np.ndarray:
        z = lu_solve(self.lu, v)
        for r, w in self.etas:
            t = z[r] / w[r]
            z -= w * t
            z[r] = t
        return z

    def btran(self, v: np.ndarray) -> np.ndarray:
        z = v.copy()
        for r, w in reversed(self.etas):
            z[r] = (z[r] * (1.0 + w[r]) - w @ z) / w[r]
        return lu_solve(self.lu, z, trans=1)

    def recompute_basics(self):
        xn = self.val.copy()
        xn[self.basis] = 0.0
        resid = self.b - self.matvec_struct(xn[: self.n]) - xn[self.n :]
        self.val[self.basis] = self.ftran(resid)


def _apply_warm(tab: _Tableau, warm):
    basis, vstat = warm
    basis = np.asarray(basis, dtype=np.int64)
    vstat = np.asarray(vstat, dtype=np.int8).copy()
    if len(basis) != tab.m or len(vstat) != tab.N:
        return False
    if len(np.unique(basis)) != tab.m or basis.min() < 0 or basis.max() >= tab.N:
        return False
    tab.basis = basis.copy()
    tab.vstat = vstat
    tab.vstat[tab.basis] = BASIC
    nb = tab.vstat != BASIC
    at_ub = nb & (tab.vstat == AT_UB) & np.isfinite(tab.ub)
    tab.val = np.where(at_ub, tab.ub, tab.lb)
    tab.val[~np.isfinite(tab.val)] = 0.0
    return True


def solve_arrays(
    blocks,
    b,
    eq,
    c,
    lb,
    ub,
    *,
    warm=None,
    feas_tol=FEAS_TOL,
    opt_tol=OPT_TOL,
    max_iter=None,
    refactor_every=100,
    bland_after=None,
) -> LpResult:
    """Run the simplex on block rows; see module docstring for conventions."""
    c = np.asarray(c, dtype=float)
    lb = np.asarray(lb, dtype=float)
    ub = np.asarray(ub, dtype=float)
    n = len(c)
    blocks = [np.asarray(B, dtype=float).reshape(-1, n) for B in blocks]
    m = sum(B.shape[0] for B in blocks)

    if np.any(lb > ub + 1e-12):
        return LpResult(
            "infeasible", -np.inf, lb.copy(), np.zeros(m), np.zeros(n),
            np.arange(n, n + m, dtype=np.int64), np.full(n + m, AT_LB, dtype=np.int8), 0,
        )
    if m == 0:
        x = np.where(c > 0, ub, lb)
        x[~np.isfinite(x)] = 0.0
        return LpResult(
            "optimal", float(c @ x), x, np.zeros(0), c.copy(),
            np.zeros(0, dtype=np.int64), np.where(c > 0, AT_UB, AT_LB).astype(np.int8), 0,
        )

    tab = _Tableau(blocks, b, eq, c, lb, ub, feas_tol, opt_tol, refactor_every)
    if max_iter is None:
        max_iter = 50 * (tab.m + tab.n) + 1000
    if bland_after is None:
        bland_after = 10 * (tab.m + tab.N)

    warm_ok = warm is not None and _apply_warm(tab, warm)
    try:
        tab.refactor()
    except SolveError:
        if not warm_ok:
            raise
        # fall back to the all-slack basis when the warm basis is singular
        tab.basis = np.arange(tab.n, tab.N, dtype=np.int64)
        tab.vstat = np.full(tab.N, AT_LB, dtype=np.int8)
        tab.vstat[tab.basis] = BASIC
        tab.val = np.zeros(tab.N)
        tab.val[: tab.n] = tab.lb[: tab.n]
        tab.refactor()
    tab.recompute_basics()

    fixed = tab.lb >= tab.ub - 1e-14  # columns that can never move
    degen = 0
    bland = False
    iters = 0
    cost_scale = max(1.0, float(np.abs(c).max()) if n else 1.0)

    while True:
        if iters >= max_iter:
            return _finish(tab, "iteration-limit", iters)
        iters += 1

        xB = tab.val[tab.basis]
        lbB = tab.lb[tab.basis]
        ubB = tab.ub[tab.basis]
        above = xB - ubB > tab.feas_tol
        below = lbB - xB > tab.feas_tol
        phase1 = bool(above.any() or below.any())

        if phase1:
            cB = np.zeros(tab.m)
            cB[above] = -1.0
            cB[below] = 1.0
            costs = np.zeros(tab.N)
            tol_d = tab.opt_tol
        else:
            costs = tab.c
            cB = tab.c[tab.basis]
            tol_d = tab.opt_tol * cost_scale
        pi = tab.btran(cB)
        d = tab.price(pi, costs)

        nb_lb = (tab.vstat == AT_LB) & ~fixed
        nb_ub = (tab.vstat == AT_UB) & ~fixed
        elig = (nb_lb & (d > tol_d)) | (nb_ub & (d < -tol_d))
        if not elig.any():
            if phase1:
                return _finish(tab, "infeasible", iters)
            return _finish(tab, "optimal", iters)

        if bland:
            q = int(np.flatnonzero(elig)[0])
        else:
            score = np.where(elig, d * d / tab.colnorm2, -1.0)
            q = int(np.argmax(score))
        sigma = 1.0 if tab.vstat[q] == AT_LB else -1.0
        w = tab.ftran(tab.col(q))

        t, r, bound = _ratio_test(tab, q, sigma, w, xB, lbB, ubB, above, below, phase1)
        if not np.isfinite(t):
            if phase1:
                raise SolveError("unblocked infeasibility-reducing ray")
            return _finish(tab, "unbounded", iters)

        if t > 0.0:
            tab.val[q] += sigma * t
            tab.val[tab.basis] -= sigma * t * w
        if r < 0:
            tab.vstat[q] = AT_UB if tab.vstat[q] == AT_LB else AT_LB
            tab.val[q] = tab.ub[q] if tab.vstat[q] == AT_UB else tab.lb[q]
        else:
            lv = int(tab.basis[r])
            tab.val[lv] = bound
            tab.vstat[lv] = AT_UB if bound == tab.ub[lv] else AT_LB
            tab.vstat[q] = BASIC
            tab.basis[r] = q
            tab.etas.append((r, w))
            if len(tab.etas) >= tab.refactor_every:
                tab.refactor()
                tab.recompute_basics()
        if t <= DEGEN_TOL:
            degen += 1
            if degen > bland_after:
                bland = True


def _ratio_test(tab, q, sigma, w, xB, lbB, ubB, above, below, phase1):
    """Largest step for entering column q; returns (t, blocker, bound).

    blocker -1 encodes a bound flip of the entering variable. In phase 1
    an infeasible basic blocks at the bound it is converging to, and is
    free to run when moving further out (its violation is priced in).
    """
    delta = -sigma * w
    m = tab.m
    ratios = np.full(m, np.inf)
    dec = delta < -PIV_TOL
    inc = delta > PIV_TOL
    feas = ~(above | below)

    if phase1:
        mask = dec & above
        ratios[mask] = (xB[mask] - ubB[mask]) / -delta[mask]
        mask = dec & feas & np.isfinite(lbB)
        ratios[mask] = (xB[mask] - lbB[mask]) / -delta[mask]
        mask = inc & below
        ratios[mask] = (lbB[mask] - xB[mask]) / delta[mask]
        mask = inc & feas & np.isfinite(ubB)
        ratios[mask] = (ubB[mask] - xB[mask]) / delta[mask]
    else:
        mask = dec & np.isfinite(lbB)
        ratios[mask] = (xB[mask] - lbB[mask]) / -delta[mask]
        mask = inc & np.isfinite(ubB)
        ratios[mask] = (ubB[mask] - xB[mask]) / delta[mask]
    np.maximum(ratios, 0.0, out=ratios)

    t_flip = tab.ub[q] - tab.lb[q]
    t_block = ratios.min() if m else np.inf
    if t_flip <= t_block:
        return (t_flip, -1, 0.0) if np.isfinite(t_flip) else (np.inf, -1, 0.0)
    if not np.isfinite(t_block):
        return np.inf, -1, 0.0
    cand = np.flatnonzero(ratios <= t_block + 1e-10)
    r = int(cand[np.argmax(np.abs(w[cand]))])
    if delta[r] < 0:
        bound = ubB[r] if (phase1 and above[r]) else lbB[r]
    else:
        bound = lbB[r] if (phase1 and below[r]) else ubB[r]
    return float(t_block), r, float(bound)


def _finish(tab: _Tableau, status: str, iters: int) -> LpResult:
    pi = tab.btran(tab.c[tab.basis])
    d = tab.price(pi, tab.c)
    x = tab.val[: tab.n].copy()
    obj = float(tab.c[: tab.n] @ x)
    return LpResult(
        status=status,
        objective=obj,
        x=x,
        duals=pi,
        reduced_costs=d[: tab.n],
        basis=tab.basis.copy(),
        vstat=tab.vstat.copy(),
        iterations=iters,
    )


# -- model-level entry point ------------------------------------------------


def model_arrays(model, bound_overrides=None):
    """Dense arrays for a MilpModel with binaries relaxed to their bounds."""
    n = model.n_cols
    A = np.zeros((model.n_rows, n))
    b = np.zeros(model.n_rows)
    eq = np.zeros(model.n_rows, dtype=bool)
    for r_i, row in enumerate(model.rows):
        for col, cv in row.coef.items():
            A[r_i, col] = cv
        b[r_i] = row.rhs
        eq[r_i] = row.sense == "=="
    lb = np.array([v.lb for v in model.var_defs])
    ub = np.array([v.ub for v in model.var_defs])
    if bound_overrides:
        for col, (lo, hi) in bound_overrides.items():
            lb[col], ub[col] = lo, hi
    return A, b, eq, model.objective_vector(), lb, ub


def solve_lp(model, bound_overrides=None, warm=None, **opts) -> LpResult:
    """LP relaxation of a model (optionally with tightened variable bounds)."""
    A, b, eq, c, lb, ub = model_arrays(model, bound_overrides)
    return solve_arrays([A], b, eq, c, lb, ub, warm=warm, **opts)
