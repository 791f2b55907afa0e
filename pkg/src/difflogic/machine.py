"""The lifted rule-induction network: D layers of B+1 arity groups.

Each layer first aligns each arity group with its neighbours (expand the
group below, keep the group itself, quantifier-reduce the group above,
concatenate), then applies a pointwise sigmoid MLP to all axis orders of the
aligned tensor. Parameter shapes depend only on the configuration, never on
the number of objects, so one trained machine evaluates at any m >= breadth.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from . import predtensor as pt
from .nn import MLPParams, init_mlp, mlp_forward
from .predtensor import PredTensor


@dataclass
class MachineConfig:
    depth: int
    breadth: int
    input_channels: tuple
    channels: int = 8           # uniform plan; set channel_plan for per-layer control
    residual: bool = False
    hidden_layers: int = 0
    hidden_width: int = 8
    channel_plan: list | None = None  # [layer][arity] overrides `channels`

    def __post_init__(self):
        if self.depth < 1 or self.breadth < 0:
            raise ValueError("need depth >= 1 and breadth >= 0")
        if len(self.input_channels) != self.breadth + 1:
            raise ValueError("input_channels must cover arities 0..breadth")
        self.input_channels = tuple(int(c) for c in self.input_channels)

    def plan(self) -> list:
        if self.channel_plan is not None:
            if len(self.channel_plan) != self.depth or any(
                len(row) != self.breadth + 1 for row in self.channel_plan
            ):
                raise ValueError("channel_plan must be depth x (breadth+1)")
            return [list(row) for row in self.channel_plan]
        return [[self.channels] * (self.breadth + 1) for _ in range(self.depth)]

    def to_dict(self) -> dict:
        return {
            "depth": self.depth,
            "breadth": self.breadth,
            "input_channels": list(self.input_channels),
            "channels": self.channels,
            "residual": self.residual,
            "hidden_layers": self.hidden_layers,
            "hidden_width": self.hidden_width,
            "channel_plan": self.channel_plan,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MachineConfig":
        d = dict(d)
        d["input_channels"] = tuple(d["input_channels"])
        return cls(**d)


def width_plan(config: MachineConfig):
    """Channel bookkeeping.

    Returns (aligned, carried): `carried[i][r]` is the width each arity group
    presents to layer i+1 (premises at i=0; with residual on, inputs are
    concatenated in front of outputs so widths accumulate), and
    `aligned[i][r]` is the width after neighbour alignment at layer i+1,
    i.e. carried[i][r-1] + carried[i][r] + 2*carried[i][r+1] with nonexistent
    neighbours dropped.
    """
    B = config.breadth
    plan = config.plan()
    carried = [list(config.input_channels)]
    aligned = []
    for i in range(config.depth):
        prev = carried[-1]
        row = []
        for r in range(B + 1):
            width = prev[r]
            if r - 1 >= 0:
                width += prev[r - 1]
            if r + 1 <= B:
                width += 2 * prev[r + 1]
            row.append(width)
        aligned.append(row)
        if config.residual:
            carried.append([prev[r] + plan[i][r] for r in range(B + 1)])
        else:
            carried.append(list(plan[i]))
    return aligned, carried


@dataclass
class MachineParams:
    """One MLP per (layer, arity group)."""

    mlps: list  # [layer][arity] -> MLPParams


def init_params(config: MachineConfig, rng: np.random.Generator) -> MachineParams:
    aligned, _ = width_plan(config)
    plan = config.plan()
    mlps = []
    for i in range(config.depth):
        row = []
        for r in range(config.breadth + 1):
            in_width = math.factorial(r) * aligned[i][r]
            row.append(init_mlp(rng, in_width, plan[i][r],
                                config.hidden_layers, config.hidden_width))
        mlps.append(row)
    return MachineParams(mlps)


def inter_group(prev: list, r: int, breadth: int) -> PredTensor:
    """Align arity group r with its neighbours from the previous layer:
    concat(expand(r-1), r, reduce(r+1)), nonexistent terms dropped."""
    parts = []
    if r - 1 >= 0:
        parts.append(pt.expand(prev[r - 1], max_arity=breadth))
    parts.append(prev[r])
    if r + 1 <= breadth:
        parts.append(pt.reduce(prev[r + 1]))
    return pt.concat_channels(parts)


def intra_group(aligned: PredTensor, mlp: MLPParams) -> PredTensor:
    """Pointwise MLP over all axis orders of the aligned tensor."""
    return mlp_forward(mlp, pt.permute_all(aligned))


@dataclass
class MachineOutput:
    outputs: list                 # final per-arity tensors (post-residual widths)
    layers: list | None = None    # all carried states when requested


def forward(config: MachineConfig, params: MachineParams, premises: list,
            keep_layers: bool = False) -> MachineOutput:
    B = config.breadth
    if len(premises) != B + 1:
        raise ValueError(f"need premises for arities 0..{B}")
    m = premises[0].m
    for r, t in enumerate(premises):
        if t.m != m:
            raise ValueError("premises disagree on object count")
        if t.arity != r:
            raise ValueError(f"premise {r} has arity {t.arity}")
        if t.channels != config.input_channels[r]:
            raise ValueError(
                f"premise arity {r} has {t.channels} channels, config says "
                f"{config.input_channels[r]}"
            )
    if m < B:
        raise ValueError(f"need m >= breadth, got m={m}, breadth={B}")

    state = list(premises)
    history = [state]
    for i in range(config.depth):
        new_state = []
        for r in range(B + 1):
            aligned = inter_group(state, r, B)
            out = intra_group(aligned, params.mlps[i][r])
            if config.residual:
                out = pt.concat_channels([state[r], out])
            new_state.append(out)
        state = new_state
        if keep_layers:
            history.append(state)
    return MachineOutput(state, history if keep_layers else None)


# ---------------------------------------------------------------------------
# output heads


@dataclass
class AffineHead:
    w: object  # (C_in, K)
    b: object  # (K,)


def init_head(rng: np.random.Generator, in_width: int, out_width: int) -> AffineHead:
    bound = 1.0 / np.sqrt(max(in_width, 1))
    return AffineHead(rng.uniform(-bound, bound, size=(in_width, out_width)),
                      np.zeros(out_width))


def classify_logits(output: MachineOutput, head: AffineHead, arity: int):
    """Two-class logits per object (arity 1) or per ordered pair (arity 2)."""
    if arity not in (1, 2):
        raise ValueError("classification reads the unary or binary group")
    if arity > len(output.outputs) - 1:
        raise ValueError(f"no arity-{arity} group in the output")
    return ad.affine(output.outputs[arity].values, head.w, head.b)


def ordered_pairs(m: int) -> list:
    """Canonical enumeration of distinct ordered pairs, row-major."""
    return [(i, j) for i in range(m) for j in range(m) if i != j]


def offdiag_flat_indices(m: int) -> np.ndarray:
    return np.asarray([i * m + j for i, j in ordered_pairs(m)], dtype=np.intp)


def pair_action_scores(output: MachineOutput, head: AffineHead):
    """Affine score per distinct ordered pair from the binary group, flattened
    in ordered_pairs() order."""
    if len(output.outputs) < 3:
        raise ValueError("no binary group in the output")
    t = output.outputs[2]
    scores = ad.affine(t.values, head.w, head.b)          # (m, m, 1)
    flat = ad.reshape(scores, (t.m * t.m,))
    return ad.take(flat, offdiag_flat_indices(t.m))


def node_action_scores(output: MachineOutput, head: AffineHead):
    """Affine score per object from the unary group."""
    t = output.outputs[1]
    scores = ad.affine(t.values, head.w, head.b)          # (m, 1)
    return ad.reshape(scores, (t.m,))


def twin_object_features(output: MachineOutput, n_ids: int):
    """Per-id features for two-world states laid out as [world A objects,
    world B objects] with matching ids: concat of both worlds' unary rows."""
    t = output.outputs[1]
    if t.m != 2 * n_ids:
        raise ValueError(f"expected {2 * n_ids} objects, got {t.m}")
    ids = np.arange(n_ids)
    return ad.concat_last([ad.take(t.values, ids), ad.take(t.values, ids + n_ids)])


def twin_pair_features(output: MachineOutput, n_ids: int):
    """Features for every distinct ordered id pair: concat of the two ids'
    twin features. Returns (features, pairs)."""
    reps = twin_object_features(output, n_ids)
    pairs = ordered_pairs(n_ids)
    first = ad.take(reps, np.asarray([i for i, _ in pairs], dtype=np.intp))
    second = ad.take(reps, np.asarray([j for _, j in pairs], dtype=np.intp))
    return ad.concat_last([first, second]), pairs


def twin_pair_scores(output: MachineOutput, head: AffineHead, n_ids: int):
    feats, pairs = twin_pair_features(output, n_ids)
    scores = ad.affine(feats, head.w, head.b)
    return ad.reshape(scores, (len(pairs),)), pairs


def twin_pair_validity_logits(output: MachineOutput, head: AffineHead, n_ids: int):
    feats, pairs = twin_pair_features(output, n_ids)
    return ad.affine(feats, head.w, head.b), pairs


# ---------------------------------------------------------------------------
# bundle + cost model


@dataclass
class Model:
    """Machine parameters plus task heads, the unit of checkpointing."""

    config: MachineConfig
    machine: MachineParams
    heads: dict = field(default_factory=dict)


def named_arrays(model: Model) -> dict:
    out = {}
    for i, row in enumerate(model.machine.mlps):
        for r, mlp in enumerate(row):
            for k, (w, b) in enumerate(zip(mlp.weights, mlp.biases)):
                out[f"layer{i + 1}.arity{r}.w{k}"] = ad.value_of(w)
                out[f"layer{i + 1}.arity{r}.b{k}"] = ad.value_of(b)
    for name, head in model.heads.items():
        out[f"head.{name}.w"] = ad.value_of(head.w)
        out[f"head.{name}.b"] = ad.value_of(head.b)
    return out


def _rebuild(model: Model, lookup) -> Model:
    mlps = []
    for i, row in enumerate(model.machine.mlps):
        new_row = []
        for r, mlp in enumerate(row):
            ws, bs = [], []
            for k in range(len(mlp.weights)):
                ws.append(lookup(f"layer{i + 1}.arity{r}.w{k}"))
                bs.append(lookup(f"layer{i + 1}.arity{r}.b{k}"))
            new_row.append(MLPParams(ws, bs))
        mlps.append(new_row)
    heads = {
        name: AffineHead(lookup(f"head.{name}.w"), lookup(f"head.{name}.b"))
        for name in model.heads
    }
    return Model(model.config, MachineParams(mlps), heads)


def as_nodes(model: Model):
    """Wrap every parameter as an autodiff leaf; returns (model', leaves)."""
    leaves = {name: ad.leaf(arr) for name, arr in named_arrays(model).items()}
    return _rebuild(model, lambda name: leaves[name]), leaves


def load_arrays(model: Model, arrays: dict) -> Model:
    """Same structure as `model` with parameter values taken from `arrays`."""
    return _rebuild(model, lambda name: np.array(arrays[name], dtype=np.float64))


@dataclass
class CostEstimate:
    macs: int
    parameters: int


def estimate_cost(config: MachineConfig, m: int) -> CostEstimate:
    """Closed-form multiply-accumulate count of one forward pass over the
    dense m^r cubes, plus the m-independent parameter count (heads excluded)."""
    aligned, _ = width_plan(config)
    plan = config.plan()
    macs = 0
    params = 0
    for i in range(config.depth):
        for r in range(config.breadth + 1):
            in_width = math.factorial(r) * aligned[i][r]
            sizes = [in_width] + [config.hidden_width] * config.hidden_layers + [plan[i][r]]
            positions = m ** r
            for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
                macs += positions * fan_in * fan_out
                params += fan_in * fan_out + fan_out
    return CostEstimate(macs, params)
