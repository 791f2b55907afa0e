"""Dense masked groundings of predicate groups and the lifted operators.

A group of C predicates of arity r over m objects is stored as a full
(m,)*r + (C,) float cube. Index tuples with a repeated object are invalid:
they are never read, and every producer writes them as 0. The mask of valid
tuples is derived from (m, r) and cached.
"""

import itertools
import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad

_MASK_CACHE: dict[tuple[int, int], np.ndarray] = {}

SERIAL_VERSION = 1


def valid_mask(m: int, r: int) -> np.ndarray:
    """Boolean (m,)*r array, True where all r object indices are distinct."""
    key = (m, r)
    cached = _MASK_CACHE.get(key)
    if cached is None:
        if r == 0:
            cached = np.asarray(True)
        else:
            idx = np.indices((m,) * r)
            cached = np.ones((m,) * r, dtype=bool)
            for a in range(r):
                for b in range(a + 1, r):
                    cached &= idx[a] != idx[b]
        cached.setflags(write=False)
        _MASK_CACHE[key] = cached
    return cached


@dataclass
class PredTensor:
    """U-grounding of a same-arity predicate group; values may be a Node."""

    m: int
    arity: int
    values: object  # ndarray or autodiff.Node

    def __post_init__(self):
        shape = np.shape(ad.value_of(self.values))
        expected = (self.m,) * self.arity
        if shape[:-1] != expected or len(shape) != self.arity + 1:
            raise ValueError(f"values shape {shape} does not match m={self.m}, r={self.arity}")

    @property
    def channels(self) -> int:
        return np.shape(ad.value_of(self.values))[-1]

    @property
    def mask(self) -> np.ndarray:
        return valid_mask(self.m, self.arity)

    def detached(self) -> "PredTensor":
        return PredTensor(self.m, self.arity, np.asarray(ad.value_of(self.values)))


def from_values(m: int, arity: int, values) -> PredTensor:
    """Canonical ndarray constructor: casts to f64 and zeroes invalid entries."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != arity + 1 or arr.shape[:arity] != (m,) * arity:
        raise ValueError(f"bad shape {arr.shape} for m={m}, r={arity}")
    arr = arr * valid_mask(m, arity)[..., None]
    return PredTensor(m, arity, arr)


def empty(m: int, arity: int) -> PredTensor:
    return PredTensor(m, arity, np.zeros((m,) * arity + (0,)))


def axis_permutations(r: int) -> list[tuple[int, ...]]:
    """All r! object-axis orders, lexicographic, identity first."""
    return list(itertools.permutations(range(r)))


def apply_permutation(t: PredTensor, perm) -> PredTensor:
    """Reorder object axes: output(x_1..x_r) = input(x_perm[0]..x_perm[r-1])."""
    perm = tuple(perm)
    if sorted(perm) != list(range(t.arity)):
        raise ValueError(f"not a permutation of {t.arity} axes: {perm}")
    if perm == tuple(range(t.arity)):
        return t
    values = ad.transpose(t.values, perm + (t.arity,))
    return PredTensor(t.m, t.arity, values)


def permute_all(t: PredTensor) -> PredTensor:
    """Stack the tensor under all r! axis orders; output has r!*C channels.

    Ordering is permutation-major: channels [k*C:(k+1)*C] hold the k-th
    permutation (lexicographic, identity first) of all input channels.
    """
    if t.arity <= 1:
        return t
    parts = [ad.transpose(t.values, perm + (t.arity,)) for perm in axis_permutations(t.arity)]
    return PredTensor(t.m, t.arity, ad.concat_last(parts))


def expand(t: PredTensor, max_arity: int | None = None) -> PredTensor:
    """Introduce one fresh distinct variable: copy values along a new last
    object axis, masking tuples that repeat an object."""
    if max_arity is not None and t.arity >= max_arity:
        raise ValueError(f"expand would exceed the configured breadth {max_arity}")
    if t.m - t.arity < 1:
        raise ValueError(f"no distinct fresh object: m={t.m}, r={t.arity}")
    out_mask = valid_mask(t.m, t.arity + 1)
    values = ad.broadcast_newaxis(t.values, t.m, out_mask)
    return PredTensor(t.m, t.arity + 1, values)


def reduce(t: PredTensor) -> PredTensor:
    """Quantify the last variable out: channels [exists-block, forall-block].

    exists = max over valid bindings of the last variable, forall = min.
    Masked entries are excluded (neutral 0 for max, 1 for min).
    """
    if t.arity == 0:
        raise ValueError("cannot reduce a nullary tensor")
    in_mask = valid_mask(t.m, t.arity)
    out_mask = valid_mask(t.m, t.arity - 1)
    exists = ad.masked_extremum(t.values, "max", in_mask, out_mask)
    forall = ad.masked_extremum(t.values, "min", in_mask, out_mask)
    return PredTensor(t.m, t.arity - 1, ad.concat_last([exists, forall]))


def concat_channels(ts: list[PredTensor]) -> PredTensor:
    if not ts:
        raise ValueError("nothing to concatenate")
    first = ts[0]
    for t in ts[1:]:
        if t.m != first.m or t.arity != first.arity:
            raise ValueError(
                f"mismatched tensors: (m={t.m}, r={t.arity}) vs (m={first.m}, r={first.arity})"
            )
    if len(ts) == 1:
        return ts[0]
    return PredTensor(first.m, first.arity, ad.concat_last([t.values for t in ts]))


def relabel_objects(t: PredTensor, perm) -> PredTensor:
    """Apply an object relabeling pi (perm[i] = new name of object i) to every
    object axis. Test helper; ndarray values only."""
    perm = np.asarray(perm)
    inverse = np.argsort(perm)
    values = np.asarray(ad.value_of(t.values))
    for axis in range(t.arity):
        values = np.take(values, inverse, axis=axis)
    return PredTensor(t.m, t.arity, values)


def to_record(t: PredTensor) -> dict:
    """Versioned serialization record with row-major f64 values."""
    values = np.asarray(ad.value_of(t.values), dtype=np.float64)
    return {
        "version": SERIAL_VERSION,
        "r": t.arity,
        "m": t.m,
        "c": int(values.shape[-1]),
        "values": [float(v) for v in values.reshape(-1)],
    }


def from_record(record: dict) -> PredTensor:
    if record.get("version") != SERIAL_VERSION:
        raise ValueError(f"unsupported record version {record.get('version')!r}")
    r, m, c = record["r"], record["m"], record["c"]
    values = np.asarray(record["values"], dtype=np.float64).reshape((m,) * r + (c,))
    return from_values(m, r, values)


def factorial(r: int) -> int:
    return math.factorial(r)
