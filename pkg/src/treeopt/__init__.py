"""Exact and heuristic maximization of tree-ensemble predictions.

The model is a weighted sum of binary decision trees; the optimizer
searches the input space through a binary encoding of threshold cells
and categorical levels. Four exact strategies (a direct model, a
per-leaf linearization, a decomposition with one value variable per
tree, and on-path row generation) share one branch-and-bound core, with
depth truncation, proximity constraints, a localized search heuristic
and brute-force oracles around them.
"""

from .benders import build_master, solve_benders
from .bnb import BnbConfig, SolveResult, solve_milp
from .encoding import cell_bounds, decode, encode, validate
from .errors import (
    ConfigError,
    DomainError,
    EncodingError,
    LoadError,
    SolveError,
    TreeoptError,
)
from .formulation import (
    add_leaf_linear_constraint,
    add_proximity_constraints,
    all_split_pairs,
    build_full,
    build_restricted,
    build_standard_linearization,
    build_truncated,
    export_lp_text,
    leaf_indicator,
    proximity,
    proximity_vectors,
    truncation_bound,
)
from .local_search import local_search, multi_start
from .model_io import convert_text_dump, load_ensemble, load_points, save_ensemble
from .oracle import (
    InstanceSpec,
    brute_force_opt,
    min_vertex_cover_size,
    random_instance,
    vertex_cover_instance,
)
from .simplex import LpResult, solve_lp
from .splitgen import find_violation, solve_splitgen_iterative, solve_splitgen_lazy
from .trees import (
    CATEGORICAL,
    NUMERIC,
    Ensemble,
    Tree,
    Variable,
    VariableSchema,
    assemble,
    collapse_ensemble,
    collapse_tree,
)

__version__ = "0.1.0"

__all__ = [
    "BnbConfig",
    "CATEGORICAL",
    "ConfigError",
    "DomainError",
    "EncodingError",
    "Ensemble",
    "InstanceSpec",
    "LoadError",
    "LpResult",
    "NUMERIC",
    "SolveError",
    "SolveResult",
    "Tree",
    "TreeoptError",
    "Variable",
    "VariableSchema",
    "add_leaf_linear_constraint",
    "add_proximity_constraints",
    "all_split_pairs",
    "assemble",
    "brute_force_opt",
    "build_full",
    "build_master",
    "build_restricted",
    "build_standard_linearization",
    "build_truncated",
    "cell_bounds",
    "collapse_ensemble",
    "collapse_tree",
    "convert_text_dump",
    "decode",
    "encode",
    "export_lp_text",
    "find_violation",
    "leaf_indicator",
    "load_ensemble",
    "load_points",
    "local_search",
    "min_vertex_cover_size",
    "multi_start",
    "proximity",
    "proximity_vectors",
    "random_instance",
    "save_ensemble",
    "solve_benders",
    "solve_lp",
    "solve_milp",
    "solve_splitgen_iterative",
    "solve_splitgen_lazy",
    "truncation_bound",
    "validate",
    "vertex_cover_instance",
]
