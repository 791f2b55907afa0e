"""Per-task architecture and training presets, and model construction."""

from dataclasses import dataclass, field

import numpy as np

from .machine import (AffineHead, MachineConfig, Model, init_head, init_params,
                      width_plan)
from .tasks import RL_CHANNELS, SUPERVISED_TASKS, input_channel_tuple


@dataclass(frozen=True)
class Preset:
    task: str
    kind: str                 # "supervised" or "rl"
    depth: int
    breadth: int
    residual: bool
    channels: int = 8
    hidden_layers: int = 0
    lr: float = 0.005
    batch: int = 4
    # supervised
    train_m: int | None = None
    max_examples: int | None = None
    loss_threshold: float = 1e-6
    # reinforcement learning
    m_range: tuple | None = None
    beta: float | None = None
    omega: float | None = None
    gamma: float | None = None
    exam_episodes: int | None = None
    rollout_episodes: int | None = None
    opt_rounds: int | None = None
    max_epochs: int | None = None
    pool_capacity: int | None = None
    aux_weight: float = 0.0
    env_kwargs: dict = field(default_factory=dict)
    eval_kwargs: dict = field(default_factory=dict)
    eval_sizes: tuple = ()


def _supervised(task, depth, breadth, residual=False, train_m=20,
                max_examples=20000, eval_sizes=()):
    return Preset(task=task, kind="supervised", depth=depth, breadth=breadth,
                  residual=residual, train_m=train_m, max_examples=max_examples,
                  eval_sizes=eval_sizes)


def _rl(task, depth, breadth, residual, m_range, aux_weight=0.0,
        env_kwargs=None, eval_kwargs=None, eval_sizes=(),
        exam_episodes=100, rollout_episodes=40, opt_rounds=160,
        max_epochs=120, pool_capacity=3000, beta=0.01):
    return Preset(task=task, kind="rl", depth=depth, breadth=breadth,
                  residual=residual, m_range=m_range, beta=beta, omega=0.5,
                  gamma=0.99, exam_episodes=exam_episodes,
                  rollout_episodes=rollout_episodes, opt_rounds=opt_rounds,
                  max_epochs=max_epochs, pool_capacity=pool_capacity,
                  aux_weight=aux_weight, env_kwargs=env_kwargs or {},
                  eval_kwargs=eval_kwargs or {}, eval_sizes=eval_sizes)


PRESETS = {
    "hasfather": _supervised("hasfather", 4, 3, train_m=20, eval_sizes=(20, 100)),
    "hassister": _supervised("hassister", 4, 3, train_m=20, eval_sizes=(20, 100)),
    "isgrandparent": _supervised("isgrandparent", 4, 3, train_m=20, eval_sizes=(20, 100)),
    "isuncle": _supervised("isuncle", 5, 3, train_m=20, eval_sizes=(20, 100)),
    "ismguncle": _supervised("ismguncle", 6, 3, train_m=20, eval_sizes=(20, 100)),
    "adjacenttored": _supervised("adjacenttored", 4, 3, train_m=10, eval_sizes=(10, 50)),
    "4connectivity": _supervised("4connectivity", 4, 3, train_m=10, eval_sizes=(10, 50)),
    "6connectivity": _supervised("6connectivity", 6, 3, train_m=10, eval_sizes=(10, 50)),
    "1outdegree": _supervised("1outdegree", 4, 3, train_m=10, eval_sizes=(10, 50)),
    "2outdegree": _supervised("2outdegree", 4, 3, train_m=10, eval_sizes=(10, 50)),
    "shouldmove": _supervised("shouldmove", 7, 2, residual=True, train_m=5,
                              eval_sizes=(5, 8)),
    "sorting": _rl("sorting", 3, 2, False, (4, 10), eval_sizes=(10, 20)),
    "path": _rl("path", 5, 3, True, (4, 10),
                env_kwargs={"max_distance": 5, "balanced": True, "bias": 3},
                eval_kwargs={"exact_distance": 4},
                eval_sizes=(10,),
                exam_episodes=200, rollout_episodes=80, opt_rounds=400,
                max_epochs=60),
    # small replay pool: stale episodes end up with vanishing probability
    # under a saturated policy and poison the updates
    "blocksworld": _rl("blocksworld", 7, 2, True, (2, 5), aux_weight=0.1,
                       exam_episodes=100, rollout_episodes=60, opt_rounds=300,
                       pool_capacity=400, beta=0.05, eval_sizes=(5,)),
}


def task_channels(task: str) -> dict:
    if task in SUPERVISED_TASKS:
        return SUPERVISED_TASKS[task].channels
    return RL_CHANNELS[task]


def machine_config(preset: Preset, **overrides) -> MachineConfig:
    depth = overrides.get("depth", preset.depth)
    breadth = overrides.get("breadth", preset.breadth)
    return MachineConfig(
        depth=depth,
        breadth=breadth,
        input_channels=input_channel_tuple(task_channels(preset.task), breadth),
        channels=overrides.get("channels", preset.channels),
        residual=overrides.get("residual", preset.residual),
        hidden_layers=overrides.get("hidden_layers", preset.hidden_layers),
        hidden_width=overrides.get("hidden_width", 8),
    )


def build_model(task: str, rng: np.random.Generator, **overrides) -> Model:
    """Machine parameters plus the task's output heads."""
    preset = PRESETS[task]
    config = machine_config(preset, **overrides)
    _, carried = width_plan(config)
    final = carried[-1]
    model = Model(config, init_params(config, rng), {})
    if preset.kind == "supervised":
        arity = SUPERVISED_TASKS[task].label_arity
        model.heads["classify"] = init_head(rng, final[arity], 2)
    elif task == "sorting":
        model.heads["action"] = init_head(rng, final[2], 1)
    elif task == "path":
        model.heads["action"] = init_head(rng, final[1], 1)
    elif task == "blocksworld":
        model.heads["action"] = init_head(rng, 4 * final[1], 1)
        model.heads["validity"] = init_head(rng, 4 * final[1], 2)
    else:
        raise KeyError(f"unknown task {task!r}")
    return model
