"""Minibatch supervised training on per-object / per-pair classification."""

import zlib
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .machine import (Model, classify_logits, forward, named_arrays, as_nodes,
                      offdiag_flat_indices)
from .nn import AdamState, adam_step
from .tasks import SupervisedTask, pad_premises, supervised_instance


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class SupervisedConfig:
    lr: float = 0.005
    batch: int = 4
    max_examples: int = 20000
    loss_threshold: float = 1e-6
    eval_every: int = 0          # steps between held-out probes; 0 disables
    eval_instances: int = 50


def instance_seed(root_seed: int, stream: str, index: int):
    """Deterministic, stateless per-instance seed (stable across processes)."""
    tag = zlib.crc32(stream.encode("utf-8"))
    return np.random.SeedSequence([int(root_seed) & (2 ** 63 - 1), tag, int(index)])


def instance_loss(node_model: Model, task: SupervisedTask, tensors: dict, labels):
    """Cross-entropy summed over all objects (or distinct ordered pairs)."""
    m = next(iter(tensors.values())).m
    premises = pad_premises(tensors, m, node_model.config.breadth)
    out = forward(node_model.config, node_model.machine, premises)
    logits = classify_logits(out, node_model.heads["classify"], task.label_arity)
    if task.label_arity == 2:
        logits = ad.take(ad.reshape(logits, (m * m, 2)), offdiag_flat_indices(m))
    return ad.softmax_cross_entropy_batch(logits, labels)


def predictions(model: Model, task: SupervisedTask, tensors: dict) -> np.ndarray:
    m = next(iter(tensors.values())).m
    premises = pad_premises(tensors, m, model.config.breadth)
    out = forward(model.config, model.machine, premises)
    logits = classify_logits(out, model.heads["classify"], task.label_arity)
    if task.label_arity == 2:
        logits = np.asarray(logits).reshape(m * m, 2)[offdiag_flat_indices(m)]
    return np.argmax(np.asarray(logits), axis=-1)


def accuracy(model: Model, task: SupervisedTask, m: int, instances: int,
             root_seed: int, stream: str = "eval") -> float:
    """Micro accuracy over all objects/pairs of fresh seeded instances."""
    correct = 0
    total = 0
    for i in range(instances):
        tensors, labels = supervised_instance(task, m, instance_seed(root_seed, stream, i))
        pred = predictions(model, task, tensors)
        correct += int((pred == labels).sum())
        total += labels.size
    return correct / max(total, 1)


def train_supervised(cfg: SupervisedConfig, model: Model, task: SupervisedTask,
                     train_m: int, root_seed: int, log=None,
                     start_step: int = 0, adam: AdamState | None = None):
    """Adam on batched cross-entropy until the loss threshold or the example
    budget. Returns (model, adam, metrics list)."""
    if adam is None:
        adam = AdamState(lr=cfg.lr)
    params = named_arrays(model)
    metrics = []
    steps = cfg.max_examples // cfg.batch
    for step in range(start_step, steps):
        node_model, leaves = as_nodes(model)
        total = None
        for k in range(cfg.batch):
            idx = step * cfg.batch + k
            tensors, labels = supervised_instance(
                task, train_m, instance_seed(root_seed, "train", idx))
            loss = instance_loss(node_model, task, tensors, labels)
            total = loss if total is None else total + loss
        total = ad.scale(total, 1.0 / cfg.batch)
        loss_value = total.item()
        if not np.isfinite(loss_value):
            raise TrainingDiverged(f"non-finite loss {loss_value} at step {step}")
        grads = ad.grads_of(total, leaves)
        if not adam_step(adam, params, grads):
            raise TrainingDiverged(f"non-finite gradient at step {step}")
        record = {"step": step, "examples": (step + 1) * cfg.batch, "loss": loss_value}
        if cfg.eval_every and (step + 1) % cfg.eval_every == 0:
            record["heldout_accuracy"] = accuracy(
                model, task, train_m, cfg.eval_instances, root_seed)
        metrics.append(record)
        if log:
            log(record)
        if loss_value < cfg.loss_threshold:
            break
    return model, adam, metrics
