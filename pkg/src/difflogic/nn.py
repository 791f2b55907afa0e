"""Pointwise sigmoid MLPs over predicate tensors and the Adam optimizer."""

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .predtensor import PredTensor


@dataclass
class MLPParams:
    """Affine stack applied at every valid index tuple; 0 or 1 hidden layers."""

    weights: list
    biases: list

    @property
    def in_width(self) -> int:
        return np.shape(ad.value_of(self.weights[0]))[0]

    @property
    def out_width(self) -> int:
        return np.shape(ad.value_of(self.weights[-1]))[1]


def init_mlp(rng: np.random.Generator, in_width: int, out_width: int,
             hidden_layers: int = 0, hidden_width: int = 8) -> MLPParams:
    """Symmetric-uniform weights with bound 1/sqrt(fan_in), zero biases."""
    if hidden_layers not in (0, 1):
        raise ValueError("only 0 or 1 hidden layers are supported")
    sizes = [in_width] + [hidden_width] * hidden_layers + [out_width]
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = 1.0 / np.sqrt(max(fan_in, 1))
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MLPParams(weights, biases)


def mlp_forward(params: MLPParams, t: PredTensor) -> PredTensor:
    """Apply the stack at every index tuple; every affine is followed by a
    sigmoid, so outputs lie in (0,1). Invalid entries are rewritten as 0."""
    if t.channels != params.in_width:
        raise ValueError(f"input width {t.channels} != expected {params.in_width}")
    x = t.values
    for w, b in zip(params.weights, params.biases):
        x = ad.sigmoid(ad.affine(x, w, b))
    x = ad.mul_mask(x, t.mask)
    return PredTensor(t.m, t.arity, x)


# ---------------------------------------------------------------------------
# Adam


@dataclass
class AdamState:
    """Per-parameter moment accumulators plus hyperparameters."""

    lr: float = 0.005
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(state: AdamState, params: dict, grads: dict) -> bool:
    """One bias-corrected Adam update, in place on `params`.

    Returns False (and leaves everything untouched) if any gradient is
    non-finite.
    """
    for g in grads.values():
        if not np.all(np.isfinite(g)):
            return False
    state.t += 1
    c1 = 1.0 - state.beta1 ** state.t
    c2 = 1.0 - state.beta2 ** state.t
    for name, g in grads.items():
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(params[name])
            state.v[name] = np.zeros_like(params[name])
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        params[name] -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return True


def adam_arrays(state: AdamState) -> dict:
    """Moment accumulators as named arrays (for checkpoints)."""
    out = {}
    for name, arr in state.m.items():
        out[f"adam.m.{name}"] = arr
    for name, arr in state.v.items():
        out[f"adam.v.{name}"] = arr
    return out


def restore_adam(state: AdamState, arrays: dict, t: int):
    state.t = t
    state.m = {k[len("adam.m."):]: np.array(v) for k, v in arrays.items() if k.startswith("adam.m.")}
    state.v = {k[len("adam.v."):]: np.array(v) for k, v in arrays.items() if k.startswith("adam.v.")}
