"""Coordinate-wise local search over the cell representatives.

Each variable's neighborhood is the finite set of values that can
change a prediction: one representative per threshold cell for numeric
variables, every level for categorical ones. A move replaces a single
coordinate by the best strictly improving candidate; any move makes all
other coordinates worth retesting. The search stops when every
coordinate has been scanned without improvement, i.e. at a coordinate
local optimum.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .oracle import cell_representatives
from .trees import Ensemble


@dataclass
class SearchResult:
    X: np.ndarray
    objective: float
    moves: int
    evals: int


@dataclass
class MultiStartResult:
    X: np.ndarray
    objective: float
    start_objectives: list
    best_start: int


def local_search(ensemble: Ensemble, rng: np.random.Generator,
                 X0=None) -> SearchResult:
    schema = ensemble.schema
    domains = cell_representatives(schema)
    if X0 is None:
        X = np.array([d[rng.integers(len(d))] for d in domains], dtype=float)
    else:
        X = schema.validate_input(X0)
    z = ensemble.predict(X)
    untested = set(range(schema.n_vars))
    moves = 0
    evals = 1
    while untested:
        order = sorted(untested)
        i = order[int(rng.integers(len(order)))]
        cand = [v for v in domains[i] if v != X[i]]
        if not cand:
            untested.discard(i)
            continue
        rows = np.tile(X, (len(cand), 1))
        rows[:, i] = cand
        vals = ensemble.batch_predict(rows)
        evals += len(cand)
        k = int(np.argmax(vals))
        if vals[k] > z:
            X = rows[k]
            z = float(vals[k])
            moves += 1
            untested = set(range(schema.n_vars)) - {i}
        else:
            untested.discard(i)
    return SearchResult(X, float(z), moves, evals)


def multi_start(ensemble: Ensemble, restarts: int = 10, seed: int = 0) -> MultiStartResult:
    if restarts < 1:
        raise ConfigError("restarts must be positive")
    best = None
    best_r = 0
    objs = []
    for r, child in enumerate(np.random.SeedSequence(seed).spawn(restarts)):
        res = local_search(ensemble, np.random.default_rng(child))
        objs.append(res.objective)
        if best is None or res.objective > best.objective:
            best, best_r = res, r
    return MultiStartResult(best.X, best.objective, objs, best_r)
