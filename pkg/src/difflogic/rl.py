"""Policy-gradient training: episodic REINFORCE with an entropy bonus,
exam-gated curriculum over instance sizes, and balanced replay pools."""

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .machine import (Model, as_nodes, forward, named_arrays,
                      node_action_scores, pair_action_scores, twin_pair_scores,
                      twin_pair_validity_logits)
from .nn import AdamState, adam_step
from .tasks import Episode, env_from_snapshot, make_env, pad_premises, rollout


@dataclass
class RLConfig:
    task: str
    lr: float = 0.005
    beta: float = 0.01            # entropy bonus weight
    beta_decay: bool = False      # optional linear decay over lessons
    gamma: float = 0.99
    omega: float = 0.5            # balanced-sampling probability
    m_range: tuple = (4, 10)
    exam_episodes: int = 100
    rollout_episodes: int = 40
    opt_rounds: int = 160
    max_epochs: int = 120
    pool_capacity: int = 3000
    aux_weight: float = 0.0
    baseline: bool = False        # optional moving-average baseline, default off
    env_kwargs: dict = field(default_factory=dict)
    eval_kwargs: dict = field(default_factory=dict)


class Pools:
    """Positive/negative episode stores with bounded capacity."""

    def __init__(self, capacity: int):
        self.positive: deque = deque(maxlen=capacity)
        self.negative: deque = deque(maxlen=capacity)

    def add(self, episode: Episode):
        (self.positive if episode.success else self.negative).append(episode)

    def sizes(self) -> tuple:
        return len(self.positive), len(self.negative)

    def sample(self, rng: np.random.Generator, omega: float) -> Episode:
        return balanced_sample(self, omega, 1, rng)[0]


def balanced_sample(pools: Pools, omega: float, n: int,
                    rng: np.random.Generator) -> list:
    """Each draw independently comes from the positive pool with probability
    omega, falling back to whichever pool is nonempty."""
    if not pools.positive and not pools.negative:
        raise ValueError("both replay pools are empty")
    out = []
    for _ in range(n):
        want_positive = rng.random() < omega
        pool = pools.positive if want_positive else pools.negative
        if not pool:
            pool = pools.negative if want_positive else pools.positive
        out.append(pool[int(rng.integers(len(pool)))])
    return out


class ModelPolicy:
    """Action distribution of a trained machine over a task's action space."""

    def __init__(self, task: str, model: Model):
        self.task = task
        self.model = model

    def _forward(self, env, model: Model):
        premises = pad_premises(env.observe(), env.m, model.config.breadth)
        return forward(model.config, model.machine, premises)

    def step_outputs(self, env, node_model: Model | None = None,
                     with_validity: bool = False):
        """(log-policy, validity logits or None) from one network evaluation."""
        model = node_model if node_model is not None else self.model
        out = self._forward(env, model)
        if self.task == "sorting":
            scores = pair_action_scores(out, model.heads["action"])
        elif self.task == "path":
            scores = node_action_scores(out, model.heads["action"])
        elif self.task == "blocksworld":
            scores, _ = twin_pair_scores(out, model.heads["action"],
                                         env.n_blocks + 1)
        else:
            raise KeyError(f"no action head wiring for task {self.task!r}")
        validity = None
        if with_validity:
            validity, _ = twin_pair_validity_logits(out, model.heads["validity"],
                                                    env.n_blocks + 1)
        return ad.log_softmax(scores), validity

    def log_policy(self, env, node_model: Model | None = None):
        return self.step_outputs(env, node_model)[0]

    def probabilities(self, env) -> np.ndarray:
        logp = np.asarray(ad.value_of(self.log_policy(env)))
        p = np.exp(logp)
        return p / p.sum()

    def act(self, env, rng: np.random.Generator | None = None,
            greedy: bool = True) -> int:
        p = self.probabilities(env)
        if greedy:
            return int(np.argmax(p))
        return int(rng.choice(len(p), p=p))


# Replayed actions the current policy has abandoned sit at astronomically
# negative log-probabilities; their policy-gradient term no longer carries
# information (the probability is already ~0) but keeps dragging shared
# weights. Below this floor the step's policy term is dropped.
REPLAY_LOGPROB_FLOOR = -10.0


def episode_loss(policy: ModelPolicy, node_model: Model, episode: Episode,
                 cfg: RLConfig, baseline: float = 0.0):
    """Negated REINFORCE objective, summed over steps:
    -(sum_t v_t log pi(a_t) + beta H(pi_t)) plus the weighted validity loss."""
    env = env_from_snapshot(episode.task, episode.snapshot)
    returns = episode.returns(cfg.gamma)
    loss = None
    for t, action in enumerate(episode.actions):
        logps, validity = policy.step_outputs(env, node_model,
                                              with_validity=bool(cfg.aux_weight))
        chosen = np.asarray(ad.value_of(logps))[action]
        if not np.isfinite(chosen):
            raise RuntimeError(
                f"chosen action has zero probability at step {t} (numerical failure)")
        term = None
        if chosen > REPLAY_LOGPROB_FLOOR:
            lp = ad.sum_all(ad.take(logps, np.asarray([action])))
            term = ad.scale(lp, -(returns[t] - baseline))
        if cfg.beta:
            probs = ad.exp(logps)
            entropy = ad.scale(ad.sum_all(ad.mul(probs, logps)), -1.0)
            bonus = ad.scale(entropy, -cfg.beta)
            term = bonus if term is None else term + bonus
        if cfg.aux_weight:
            labels = env.validity().astype(np.intp)
            aux = ad.softmax_cross_entropy_batch(validity, labels)
            aux = ad.scale(aux, cfg.aux_weight / len(labels))
            term = aux if term is None else term + aux
        if term is not None:
            loss = term if loss is None else loss + term
        env.step(action)
    return loss


@dataclass
class BaselineState:
    value: float = 0.0
    momentum: float = 0.9
    initialized: bool = False

    def update(self, returns: list):
        mean = float(np.mean(returns)) if returns else 0.0
        if not self.initialized:
            self.value = mean
            self.initialized = True
        else:
            self.value = self.momentum * self.value + (1 - self.momentum) * mean


def reinforce_update(policy: ModelPolicy, adam: AdamState, episode: Episode,
                     cfg: RLConfig, baseline: BaselineState | None = None) -> dict:
    """One Adam step on one episode's objective."""
    node_model, leaves = as_nodes(policy.model)
    base = baseline.value if (baseline and cfg.baseline) else 0.0
    loss = episode_loss(policy, node_model, episode, cfg, base)
    if baseline is not None:
        baseline.update(episode.returns(cfg.gamma))
    if loss is None:  # every step floored out and no regularizers
        return {"loss": 0.0, "applied": False}
    grads = ad.grads_of(loss, leaves)
    applied = adam_step(adam, named_arrays(policy.model), grads)
    return {"loss": loss.item(), "applied": applied}


def lesson_thresholds(n_lessons: int) -> list:
    """Final lesson wants 100%, each earlier lesson 0.5% less."""
    return [1.0 - 0.005 * (n_lessons - 1 - i) for i in range(n_lessons)]


def run_exam(policy, task: str, sizes: list, episodes: int,
             rng: np.random.Generator, env_kwargs: dict,
             lesson: int) -> tuple:
    """Greedy evaluation over instances drawn from the given sizes; returns
    (accuracy, episode list)."""
    collected = []
    successes = 0
    for _ in range(episodes):
        m = int(sizes[int(rng.integers(len(sizes)))])
        env = make_env(task, m, rng.integers(2 ** 63), **env_kwargs)
        ep = rollout(env, policy, rng, greedy=True, lesson=lesson)
        collected.append(ep)
        successes += int(ep.success)
    return successes / max(episodes, 1), collected


@dataclass
class LessonReport:
    m: int
    threshold: float
    passed: bool
    epochs: int
    exam_accuracy: float


@dataclass
class CurriculumReport:
    graduated: bool
    lessons: list
    epochs_total: int = 0


def curriculum_train(cfg: RLConfig, policy: ModelPolicy,
                     rng: np.random.Generator, log=None,
                     on_lesson_pass=None, start_lesson: int = 0) -> CurriculumReport:
    """Exam-gated curriculum: per lesson, examine; on failure collect fresh
    episodes and run optimization rounds on balanced pool samples; advance on
    passing the lesson threshold. Graduation passes the last lesson at 100%."""
    sizes = list(range(cfg.m_range[0], cfg.m_range[1] + 1))
    thresholds = lesson_thresholds(len(sizes))
    adam = AdamState(lr=cfg.lr)
    pools = Pools(cfg.pool_capacity)
    baseline = BaselineState()
    report = CurriculumReport(graduated=False, lessons=[])
    epochs_total = 0

    for lesson, (m, threshold) in enumerate(zip(sizes, thresholds)):
        if lesson < start_lesson:
            # restored from a lesson-pass checkpoint
            report.lessons.append(LessonReport(m, threshold, True, 0, 1.0))
            continue
        recent = sizes[max(0, lesson - 2): lesson + 1]
        beta = cfg.beta
        if cfg.beta_decay and len(sizes) > 1:
            beta = cfg.beta * (1.0 - lesson / (len(sizes) - 1))
        lesson_cfg = RLConfig(**{**cfg.__dict__, "beta": beta})
        passed = False
        accuracy = 0.0
        epoch = 0
        train_loss = None
        for epoch in range(1, cfg.max_epochs + 1):
            epochs_total += 1
            accuracy, exam_eps = run_exam(policy, cfg.task, recent,
                                          cfg.exam_episodes, rng,
                                          cfg.env_kwargs, lesson)
            for ep in exam_eps:
                pools.add(ep)
            if log:
                log({"lesson": lesson, "m": m, "epoch": epoch,
                     "exam_accuracy": accuracy, "threshold": threshold,
                     "exam_m": list(recent), "loss": train_loss,
                     "pool_pos": pools.sizes()[0], "pool_neg": pools.sizes()[1],
                     "beta": beta})
            if accuracy >= threshold:
                passed = True
                break
            for _ in range(cfg.rollout_episodes):
                env = make_env(cfg.task, m, rng.integers(2 ** 63), **cfg.env_kwargs)
                pools.add(rollout(env, policy, rng, greedy=False, lesson=lesson))
            losses = []
            for _ in range(cfg.opt_rounds):
                episode = pools.sample(rng, cfg.omega)
                losses.append(reinforce_update(policy, adam, episode,
                                               lesson_cfg, baseline)["loss"])
            train_loss = float(np.mean(losses)) if losses else None
        report.lessons.append(LessonReport(m, threshold, passed, epoch, accuracy))
        if passed and on_lesson_pass:
            on_lesson_pass(lesson, m)
        if not passed:
            report.epochs_total = epochs_total
            return report
    report.graduated = True
    report.epochs_total = epochs_total
    return report


def evaluate(policy, task: str, m: int, episodes: int, seed,
             greedy: bool = True, env_kwargs: dict | None = None) -> dict:
    """Completion rate and mean moves among completions over fresh episodes."""
    rng = np.random.default_rng(seed)
    successes = 0
    moves = []
    for _ in range(episodes):
        env = make_env(task, m, rng.integers(2 ** 63), **(env_kwargs or {}))
        ep = rollout(env, policy, rng, greedy=greedy)
        if ep.success:
            successes += 1
            moves.append(ep.moves)
    return {
        "episodes": episodes,
        "success_rate": successes / max(episodes, 1),
        "avg_moves": float(np.mean(moves)) if moves else None,
    }


class UniformRandomPolicy:
    """Baseline agent: uniform over the action space, always sampling."""

    def act(self, env, rng: np.random.Generator | None = None,
            greedy: bool = True) -> int:
        return int(rng.integers(len(env.actions)))
