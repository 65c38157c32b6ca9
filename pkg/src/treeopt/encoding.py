"""Binary encoding of raw inputs: threshold ladders and one-hot levels.

Numeric variable i with thresholds a_1 < ... < a_K encodes as K bits,
bit j = 1 iff X_i <= a_j (so the bits are nondecreasing along j).
Categorical variables encode one-hot over their levels. Decoding picks
the canonical representative of the encoded cell: the smallest threshold
whose bit is set, or one unit past the last threshold when none is.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import EncodingError
from .trees import CATEGORICAL, NUMERIC, VariableSchema


@dataclass(frozen=True)
class Violation:
    """First structural defect found in an encoding vector."""

    var: int
    bit: int
    kind: str
    message: str


def encode(schema: VariableSchema, X) -> np.ndarray:
    """Encode a raw input vector into the schema's bit layout."""
    X = schema.validate_input(X)
    x = np.zeros(schema.n_bits, dtype=np.int8)
    for i, v in enumerate(schema.variables):
        if not schema.is_active(i):
            continue
        base = schema.bit_offset(i)
        if v.kind == NUMERIC:
            for j, a in enumerate(v.split_points):
                x[base + j] = 1 if X[i] <= a else 0
        else:
            x[base + int(X[i]) - 1] = 1
    return x


def decode(schema: VariableSchema, x: np.ndarray, unsplit_default: float = 0.0) -> np.ndarray:
    """Map a valid encoding back to the canonical raw vector of its cell.

    Inactive variables carry no information; numeric ones decode to
    `unsplit_default` and categorical ones to level 1.
    """
    bad = validate(schema, x)
    if bad is not None:
        raise EncodingError(bad.message)
    X = np.zeros(schema.n_vars)
    for i, v in enumerate(schema.variables):
        if not schema.is_active(i):
            X[i] = unsplit_default if v.kind == NUMERIC else 1.0
            continue
        base = schema.bit_offset(i)
        k = schema.n_bits_of(i)
        bits = x[base : base + k]
        if v.kind == NUMERIC:
            on = np.flatnonzero(bits)
            X[i] = v.split_points[on[0]] if len(on) else v.split_points[-1] + 1.0
        else:
            X[i] = float(np.flatnonzero(bits)[0] + 1)
    return X


def validate(schema: VariableSchema, x) -> Violation | None:
    """Check ladder monotonicity and one-hot structure; None when valid."""
    x = np.asarray(x)
    if x.shape != (schema.n_bits,):
        return Violation(-1, -1, "shape", f"expected {schema.n_bits} bits, got shape {x.shape}")
    for i, v in enumerate(schema.variables):
        if not schema.is_active(i):
            continue
        base = schema.bit_offset(i)
        k = schema.n_bits_of(i)
        bits = x[base : base + k]
        for j, b in enumerate(bits):
            if b not in (0, 1):
                return Violation(i, j, "binary", f"{v.name}: bit {j} is {b!r}, not 0/1")
        if v.kind == NUMERIC:
            for j in range(k - 1):
                if bits[j] > bits[j + 1]:
                    return Violation(
                        i, j, "ladder", f"{v.name}: bit {j} set but bit {j + 1} clear"
                    )
        else:
            if bits.sum() != 1:
                return Violation(
                    i, 0, "one-hot", f"{v.name}: {int(bits.sum())} levels selected"
                )
    return None


def cell_bounds(schema: VariableSchema, x: np.ndarray) -> list[tuple[float, float]]:
    """Per-variable region represented by the encoding.

    Numeric variables give the half-open interval (lo, hi] the encoding
    pins down (+-inf at the ends), categorical ones a degenerate
    [level, level] pair.
    """
    bad = validate(schema, x)
    if bad is not None:
        raise EncodingError(bad.message)
    out = []
    for i, v in enumerate(schema.variables):
        if not schema.is_active(i):
            out.append((-math.inf, math.inf) if v.kind == NUMERIC else (1.0, float(v.n_levels)))
            continue
        base = schema.bit_offset(i)
        k = schema.n_bits_of(i)
        bits = x[base : base + k]
        if v.kind == NUMERIC:
            on = np.flatnonzero(bits)
            if len(on):
                j = int(on[0])
                lo = v.split_points[j - 1] if j > 0 else -math.inf
                out.append((lo, v.split_points[j]))
            else:
                out.append((v.split_points[-1], math.inf))
        else:
            lv = float(np.flatnonzero(bits)[0] + 1)
            out.append((lv, lv))
    return out
