"""Threshold-ladder / one-hot encoding, decoding, and cell geometry."""

import itertools
import math

import numpy as np
import pytest

import treeopt as T
from treeopt.encoding import Violation, cell_bounds, decode, encode, validate
from treeopt.errors import EncodingError
from treeopt.oracle import cell_representatives

SCHEMA = T.VariableSchema(
    (
        T.Variable("v1", "numeric", split_points=(2.0, 5.0)),
        T.Variable("c1", "categorical", n_levels=3),
    )
)


def all_valid_encodings(schema):
    """Enumerate every structurally valid bit vector for a small schema."""
    per_var = []
    for i, v in enumerate(schema.variables):
        k = schema.n_bits_of(i)
        if k == 0:
            per_var.append([()])
        elif v.kind == "numeric":
            # ladders: j leading zeros then ones, plus all-zero
            per_var.append([tuple([0] * j + [1] * (k - j)) for j in range(k + 1)])
        else:
            per_var.append([tuple(int(t == j) for t in range(k)) for j in range(k)])
    for combo in itertools.product(*per_var):
        yield np.array([b for part in combo for b in part], dtype=np.int8)


def test_encode_hand_values():
    assert encode(SCHEMA, [1.0, 2]).tolist() == [1, 1, 0, 1, 0]
    assert encode(SCHEMA, [2.0, 1]).tolist() == [1, 1, 1, 0, 0]
    assert encode(SCHEMA, [3.5, 3]).tolist() == [0, 1, 0, 0, 1]
    assert encode(SCHEMA, [7.0, 1]).tolist() == [0, 0, 1, 0, 0]


def test_encode_decode_roundtrip_over_all_cells():
    for x in all_valid_encodings(SCHEMA):
        X = decode(SCHEMA, x)
        assert encode(SCHEMA, X).tolist() == x.tolist()
    # 6 numeric cells would be 3, times 3 levels = 9 total
    assert sum(1 for _ in all_valid_encodings(SCHEMA)) == 9


def test_decode_picks_canonical_representative():
    X = decode(SCHEMA, np.array([0, 1, 1, 0, 0]))
    assert X.tolist() == [5.0, 1.0]  # smallest set threshold
    X = decode(SCHEMA, np.array([0, 0, 0, 1, 0]))
    assert X.tolist() == [6.0, 2.0]  # one past the last threshold


def test_decode_unsplit_variables():
    schema = T.VariableSchema(
        (
            T.Variable("used", "numeric", split_points=(1.0,)),
            T.Variable("idle", "numeric"),
            T.Variable("idle_cat", "categorical", n_levels=4),
        ),
        active=[True, False, False],
    )
    assert schema.n_bits == 1
    X = decode(schema, np.array([1]), unsplit_default=-7.5)
    assert X.tolist() == [1.0, -7.5, 1.0]
    lo, hi = cell_bounds(schema, np.array([1]))[1]
    assert lo == -math.inf and hi == math.inf
    assert cell_bounds(schema, np.array([1]))[2] == (1.0, 4.0)


@pytest.mark.parametrize(
    "bits,kind",
    [
        ([1, 1, 1], "shape"),
        ([1, 0, 1, 0, 0], "ladder"),
        ([1, 1, 0, 0, 0], "one-hot"),
        ([1, 1, 1, 1, 1], "one-hot"),
        ([2, 1, 0, 1, 0], "binary"),
        ([0.5, 1, 0, 1, 0], "binary"),
    ],
)
def test_validate_flags_structural_defects(bits, kind):
    bad = validate(SCHEMA, np.array(bits))
    assert isinstance(bad, Violation)
    assert bad.kind == kind
    with pytest.raises(EncodingError):
        decode(SCHEMA, np.array(bits))
    with pytest.raises(EncodingError):
        cell_bounds(SCHEMA, np.array(bits))


def test_validate_accepts_every_cell():
    for x in all_valid_encodings(SCHEMA):
        assert validate(SCHEMA, x) is None


def test_cell_bounds_partition_numeric_axis():
    intervals = []
    for j in range(3):
        x = np.array([0] * j + [1] * (2 - j) + [1, 0, 0], dtype=np.int8)
        intervals.append(cell_bounds(SCHEMA, x)[0])
    assert intervals == [(-math.inf, 2.0), (2.0, 5.0), (5.0, math.inf)]
    # representative of each cell encodes back into it
    for (lo, hi), x in zip(intervals, (encode(SCHEMA, [0.0, 1]),)):
        assert lo < 0.0 <= hi


def test_cell_bounds_contain_their_representative():
    rng = np.random.default_rng(2)
    for seed in range(8):
        spec = T.InstanceSpec(n_vars=5, max_depth=4, categorical_fraction=0.4,
                              seed=700 + seed)
        schema = T.random_instance(spec).schema
        doms = cell_representatives(schema)
        for _ in range(20):
            X = np.array([d[rng.integers(len(d))] for d in doms])
            x = encode(schema, X)
            for i, (lo, hi) in enumerate(cell_bounds(schema, x)):
                v = schema.variables[i]
                if v.kind == "numeric" and schema.is_active(i):
                    assert lo < X[i] <= hi
                elif v.kind == "categorical":
                    assert lo <= X[i] <= hi


def test_encode_rejects_bad_raw_input():
    from treeopt.errors import DomainError

    with pytest.raises(DomainError):
        encode(SCHEMA, [1.0])
    with pytest.raises(DomainError):
        encode(SCHEMA, [np.inf, 1])
    with pytest.raises(DomainError):
        encode(SCHEMA, [1.0, 0])
