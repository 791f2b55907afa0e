"""Minimal reverse-mode automatic differentiation.

Every operation here accepts either plain numpy arrays (pure forward
evaluation, no recording) or `Node` instances (recorded, differentiable).
A backward pass walks the recorded graph once in reverse creation order,
which is a valid reverse topological order because parents always exist
before their children.
"""

import itertools
import math
from contextlib import contextmanager

import numpy as np

_NODE_IDS = itertools.count()

# Active multiply-accumulate counters; `affine` reports into all of them.
_MAC_COUNTERS: list[list[int]] = []


class Node:
    """One value in a recorded computation. Single-use: build, backward, drop."""

    __slots__ = ("value", "parents", "adjoint", "nid")

    def __init__(self, value, parents=()):
        self.value = value
        self.parents = tuple(parents)  # (parent Node, vjp(adjoint) -> contribution)
        self.adjoint = None
        self.nid = next(_NODE_IDS)

    @property
    def shape(self):
        return np.shape(self.value)

    def item(self) -> float:
        return float(np.asarray(self.value).reshape(()))

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, scale(other, -1.0))

    def __mul__(self, other):
        if isinstance(other, Node):
            return mul(self, other)
        return scale(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return scale(self, -1.0)

    def __repr__(self):
        return f"Node(shape={self.shape}, nid={self.nid})"


def is_node(x) -> bool:
    return isinstance(x, Node)


def value_of(x):
    return x.value if isinstance(x, Node) else x


def leaf(value) -> Node:
    return Node(np.asarray(value, dtype=np.float64))


def _record(value, parents):
    """Make a Node keeping only the parents that are themselves Nodes."""
    kept = tuple((p, f) for p, f in parents if isinstance(p, Node))
    return Node(value, kept)


def _any_node(*xs) -> bool:
    return any(isinstance(x, Node) for x in xs)


class CyclicTapeError(RuntimeError):
    pass


def backward(loss: Node):
    """Populate adjoints of everything `loss` depends on. Loss must be scalar."""
    if not isinstance(loss, Node):
        raise TypeError("backward needs a recorded Node")
    if np.size(loss.value) != 1:
        raise ValueError(f"loss must be scalar, got shape {loss.shape}")

    seen = {}
    stack = [loss]
    while stack:
        node = stack.pop()
        if node.nid in seen:
            continue
        seen[node.nid] = node
        for parent, _ in node.parents:
            # Creation order is topological; a parent with a larger id would
            # mean the graph was mutated into a cycle.
            if parent.nid >= node.nid:
                raise CyclicTapeError("node references a later node as input")
            stack.append(parent)

    loss.adjoint = np.ones_like(np.asarray(loss.value, dtype=np.float64))
    for node in sorted(seen.values(), key=lambda n: n.nid, reverse=True):
        if node.adjoint is None:
            continue
        for parent, vjp in node.parents:
            contribution = vjp(node.adjoint)
            if parent.adjoint is None:
                parent.adjoint = np.array(contribution, dtype=np.float64, copy=True)
            else:
                parent.adjoint = parent.adjoint + contribution


def grads_of(loss: Node, leaves: dict) -> dict:
    """backward() then collect adjoints for a name->Node mapping (zeros if unused)."""
    backward(loss)
    out = {}
    for name, node in leaves.items():
        if node.adjoint is None:
            out[name] = np.zeros_like(node.value)
        else:
            out[name] = node.adjoint
    return out


# ---------------------------------------------------------------------------
# elementwise / structural primitives


def add(a, b):
    out = value_of(a) + value_of(b)
    if not _any_node(a, b):
        return out
    return _record(out, [(a, lambda g: g), (b, lambda g: g)])


def mul(a, b):
    """Elementwise product; operands must have the same shape (or be scalars)."""
    av, bv = value_of(a), value_of(b)
    out = av * bv
    if not _any_node(a, b):
        return out
    return _record(out, [(a, lambda g: g * bv), (b, lambda g: g * av)])


def scale(x, c: float):
    out = value_of(x) * c
    if not is_node(x):
        return out
    return _record(out, [(x, lambda g: g * c)])


def sigmoid(x):
    xv = np.asarray(value_of(x))
    out = np.empty_like(xv, dtype=np.float64)
    pos = xv >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-xv[pos]))
    ex = np.exp(xv[~pos])
    out[~pos] = ex / (1.0 + ex)
    if not is_node(x):
        return out
    return _record(out, [(x, lambda g: g * out * (1.0 - out))])


def exp(x):
    out = np.exp(value_of(x))
    if not is_node(x):
        return out
    return _record(out, [(x, lambda g: g * out)])


def log(x):
    xv = value_of(x)
    out = np.log(xv)
    if not is_node(x):
        return out
    return _record(out, [(x, lambda g: g / xv)])


def sum_all(x):
    out = np.sum(value_of(x))
    if not is_node(x):
        return out
    shape = np.shape(x.value)
    return _record(out, [(x, lambda g: np.broadcast_to(g, shape))])


def reshape(x, shape):
    xv = value_of(x)
    out = np.reshape(xv, shape)
    if not is_node(x):
        return out
    orig = np.shape(xv)
    return _record(out, [(x, lambda g: np.reshape(g, orig))])


def transpose(x, axes):
    axes = tuple(axes)
    out = np.transpose(value_of(x), axes)
    if not is_node(x):
        return out
    inverse = tuple(np.argsort(axes))
    return _record(out, [(x, lambda g: np.transpose(g, inverse))])


def concat_last(parts):
    """Concatenate along the last axis."""
    values = [value_of(p) for p in parts]
    out = np.concatenate(values, axis=-1)
    if not _any_node(*parts):
        return out
    offsets = np.cumsum([0] + [v.shape[-1] for v in values])
    parents = []
    for part, lo, hi in zip(parts, offsets[:-1], offsets[1:]):
        parents.append((part, lambda g, lo=int(lo), hi=int(hi): g[..., lo:hi]))
    return _record(out, parents)


def take(x, indices):
    """Gather rows along the first axis; duplicate indices accumulate gradient."""
    idx = np.asarray(indices, dtype=np.intp)
    xv = value_of(x)
    out = xv[idx]

    if not is_node(x):
        return out

    def vjp(g):
        z = np.zeros_like(xv)
        np.add.at(z, idx, g)
        return z

    return _record(out, [(x, vjp)])


def mul_mask(x, mask):
    """Multiply by a constant boolean mask broadcast below the channel axis."""
    m = np.asarray(mask)[..., None]
    out = value_of(x) * m
    if not is_node(x):
        return out
    return _record(out, [(x, lambda g: g * m)])


def broadcast_newaxis(x, m: int, out_mask):
    """Copy values along one fresh axis inserted before the channel axis.

    Entries where `out_mask` (shape = object axes of the result) is False are
    written as 0; the backward pass sums surviving copies.
    """
    xv = value_of(x)
    target = xv.shape[:-1] + (m, xv.shape[-1])
    mask_b = np.asarray(out_mask)[..., None]
    out = np.broadcast_to(xv[..., None, :], target) * mask_b
    if not is_node(x):
        return out
    return _record(out, [(x, lambda g: np.sum(g * mask_b, axis=-2))])


def masked_extremum(x, mode: str, in_mask, out_mask):
    """Max or min over the last object axis (axis -2), masked entries excluded.

    Empty valid sets produce the neutral element (0 for max, 1 for min). The
    subgradient routes to the first extremal valid element in index order.
    """
    if mode not in ("max", "min"):
        raise ValueError(mode)
    xv = value_of(x)
    in_b = np.asarray(in_mask)[..., None]
    out_b = np.asarray(out_mask)[..., None]
    neutral = 0.0 if mode == "max" else 1.0
    sentinel = -np.inf if mode == "max" else np.inf

    filled = np.where(in_b, xv, neutral)
    ranked = np.where(in_b, xv, sentinel)
    if mode == "max":
        vals = filled.max(axis=-2)
        idx = np.argmax(ranked, axis=-2)
    else:
        vals = filled.min(axis=-2)
        idx = np.argmin(ranked, axis=-2)
    out = vals * out_b

    if not is_node(x):
        return out

    def vjp(g):
        z = np.zeros_like(xv)
        np.put_along_axis(z, np.expand_dims(idx, -2), np.expand_dims(g * out_b, -2), axis=-2)
        # all-invalid fibers routed their (meaningless) gradient at index 0
        return z * in_b

    return _record(out, [(x, vjp)])


# ---------------------------------------------------------------------------
# dense layers and losses


@contextmanager
def count_macs():
    """Context manager yielding a one-element list accumulating affine MACs."""
    counter = [0]
    _MAC_COUNTERS.append(counter)
    try:
        yield counter
    finally:
        _MAC_COUNTERS.remove(counter)


def affine(x, w, b):
    """y = x @ w + b applied on the last axis; x: (..., K), w: (K, N), b: (N,)."""
    xv, wv, bv = value_of(x), value_of(w), value_of(b)
    out = xv @ wv + bv
    if _MAC_COUNTERS:
        macs = int(np.prod(xv.shape[:-1], dtype=np.int64)) * wv.shape[0] * wv.shape[1]
        for counter in _MAC_COUNTERS:
            counter[0] += macs
    if not _any_node(x, w, b):
        return out

    k = wv.shape[0]
    n = wv.shape[1]

    def vjp_x(g):
        return g @ wv.T

    def vjp_w(g):
        if k == 0:
            return np.zeros((0, n))
        return xv.reshape(-1, k).T @ g.reshape(-1, n)

    def vjp_b(g):
        return g.reshape(-1, n).sum(axis=0)

    return _record(out, [(x, vjp_x), (w, vjp_w), (b, vjp_b)])


def _logsumexp_shifted(shifted: np.ndarray) -> float:
    """log(sum(exp(shifted))) where max(shifted) == 0, via log1p for full
    precision when the non-max terms are tiny."""
    rest = np.exp(shifted)
    rest[np.argmax(shifted)] = 0.0
    return math.log1p(rest.sum())


def log_softmax(x):
    """Stable log-softmax of a 1-D score vector."""
    xv = value_of(x)
    if np.ndim(xv) != 1 or xv.shape[0] < 1:
        raise ValueError("log_softmax expects a nonempty 1-D vector")
    shifted = xv - xv.max()
    out = shifted - _logsumexp_shifted(shifted)
    if not is_node(x):
        return out
    probs = np.exp(out)
    return _record(out, [(x, lambda g: g - probs * g.sum())])


def softmax_cross_entropy(logits, label: int):
    """-log softmax probability of `label`; gradient is softmax - one_hot."""
    lv = np.asarray(value_of(logits), dtype=np.float64)
    if lv.ndim != 1 or lv.shape[0] < 2:
        raise ValueError("need at least two logits")
    if not 0 <= label < lv.shape[0]:
        raise ValueError(f"label {label} out of range for {lv.shape[0]} classes")
    shifted = lv - lv.max()
    logprobs = shifted - _logsumexp_shifted(shifted)
    out = -logprobs[label]
    if not is_node(logits):
        return out
    probs = np.exp(logprobs)

    def vjp(g):
        grad = probs.copy()
        grad[label] -= 1.0
        return grad * g

    return _record(out, [(logits, vjp)])


def softmax_cross_entropy_batch(logits, labels):
    """Sum of per-row cross-entropies; logits (N, K), labels (N,)."""
    lv = np.asarray(value_of(logits), dtype=np.float64)
    lab = np.asarray(labels, dtype=np.intp)
    if lv.ndim != 2 or lv.shape[1] < 2:
        raise ValueError("need (N, K>=2) logits")
    if lab.shape != (lv.shape[0],):
        raise ValueError("labels must match logits rows")
    if lab.min(initial=0) < 0 or lab.max(initial=0) >= lv.shape[1]:
        raise ValueError("label out of range")
    shifted = lv - lv.max(axis=1, keepdims=True)
    logprobs = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    rows = np.arange(lv.shape[0])
    out = -logprobs[rows, lab].sum()
    if not is_node(logits):
        return out
    probs = np.exp(logprobs)

    def vjp(g):
        grad = probs.copy()
        grad[rows, lab] -= 1.0
        return grad * g

    return _record(out, [(logits, vjp)])
