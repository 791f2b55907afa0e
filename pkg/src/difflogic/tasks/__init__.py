"""Task registry: supervised generators/labels and environment factories."""

from dataclasses import dataclass

import numpy as np

from .. import predtensor as pt
from ..machine import ordered_pairs
from . import blocks, family, graphs, pathfind, sorting
from .episode import Episode, rollout

__all__ = [
    "Episode", "rollout", "pad_premises", "input_channel_tuple",
    "SupervisedTask", "SUPERVISED_TASKS", "RL_TASKS", "supervised_instance",
    "make_env", "env_from_snapshot", "scripted_agent",
]


def pad_premises(tensors: dict, m: int, breadth: int) -> list:
    """Arity-keyed tensors -> dense list 0..breadth, empty groups filled in."""
    out = []
    for r in range(breadth + 1):
        t = tensors.get(r)
        out.append(t if t is not None else pt.empty(m, r))
    return out


def input_channel_tuple(channels: dict, breadth: int) -> tuple:
    return tuple(channels.get(r, 0) for r in range(breadth + 1))


@dataclass(frozen=True)
class SupervisedTask:
    name: str
    channels: dict          # arity -> premise channels
    label_arity: int
    generate: object        # (m, seed) -> instance
    premises: object        # instance -> dict arity -> PredTensor
    labels: object          # instance -> bool array (m,) or (m, m)
    object_count: object    # instance -> number of objects the model sees


def _family_task(target: str) -> SupervisedTask:
    return SupervisedTask(
        name=target,
        channels=family.INPUT_CHANNELS,
        label_arity=1 if family.LABEL_PROGRAMS[target][1] == 1 else 2,
        generate=lambda m, seed: family.gen_family_tree(m, seed),
        premises=family.encode_premises,
        labels=lambda tree, target=target: family.family_labels(tree, target),
        object_count=lambda tree: tree.m,
    )


def _graph_task(target: str) -> SupervisedTask:
    arity = 2 if target.endswith("connectivity") else 1
    return SupervisedTask(
        name=target,
        channels=graphs.INPUT_CHANNELS,
        label_arity=arity,
        generate=lambda m, seed: graphs.gen_graph(m, (1, 4), seed, undirected=False),
        premises=graphs.encode_premises,
        labels=lambda g, target=target: graphs.graph_labels(g, target),
        object_count=lambda g: g.m,
    )


def _shouldmove_task() -> SupervisedTask:
    return SupervisedTask(
        name="shouldmove",
        channels=blocks.INPUT_CHANNELS,
        label_arity=1,
        generate=lambda m, seed: blocks.BlocksEnv.generate(m, seed),
        premises=lambda env: env.observe(),
        labels=blocks.shouldmove_labels,
        object_count=lambda env: env.m,
    )


SUPERVISED_TASKS = {
    "hasfather": _family_task("hasfather"),
    "hassister": _family_task("hassister"),
    "isgrandparent": _family_task("isgrandparent"),
    "isuncle": _family_task("isuncle"),
    "ismguncle": _family_task("ismguncle"),
    "adjacenttored": _graph_task("adjacenttored"),
    "4connectivity": _graph_task("4connectivity"),
    "6connectivity": _graph_task("6connectivity"),
    "1outdegree": _graph_task("1outdegree"),
    "2outdegree": _graph_task("2outdegree"),
    "shouldmove": _shouldmove_task(),
}


def supervised_instance(task: SupervisedTask, m: int, seed) -> tuple:
    """(premise dict, flat labels) with pair labels in ordered_pairs order."""
    instance = task.generate(m, seed)
    tensors = task.premises(instance)
    raw = task.labels(instance)
    n = task.object_count(instance)
    if task.label_arity == 1:
        labels = np.asarray(raw, dtype=np.intp)
    else:
        labels = np.asarray([raw[i, j] for i, j in ordered_pairs(n)], dtype=np.intp)
    return tensors, labels


RL_TASKS = {
    "sorting": sorting.SortingEnv,
    "path": pathfind.PathEnv,
    "blocksworld": blocks.BlocksEnv,
}

RL_CHANNELS = {
    "sorting": sorting.INPUT_CHANNELS,
    "path": pathfind.INPUT_CHANNELS,
    "blocksworld": blocks.INPUT_CHANNELS,
}


def make_env(task: str, m: int, seed, **kwargs):
    return RL_TASKS[task].generate(m, seed, **kwargs)


def env_from_snapshot(task: str, snapshot):
    return RL_TASKS[task].from_snapshot(snapshot)


def scripted_agent(task: str):
    return {
        "sorting": sorting.SelectionSortAgent,
        "path": pathfind.ShortestPathAgent,
        "blocksworld": blocks.BlocksPlannerAgent,
    }[task]()
