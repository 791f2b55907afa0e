import dataclasses
import math

import numpy as np
import pytest

from difflogic import autodiff as ad
from difflogic import rl as rl_mod
from difflogic.machine import named_arrays, as_nodes
from difflogic.nn import AdamState
from difflogic.presets import build_model
from difflogic.rl import (BaselineState, ModelPolicy, Pools, RLConfig,
                          UniformRandomPolicy, balanced_sample, curriculum_train,
                          episode_loss, evaluate, lesson_thresholds,
                          reinforce_update, run_exam)
from difflogic.supervised import (SupervisedConfig, accuracy, train_supervised)
from difflogic.tasks import (SUPERVISED_TASKS, make_env, rollout,
                             scripted_agent)
from difflogic.verify import finite_difference, rel_error


def small_cfg(task, **kw):
    return RLConfig(task=task, **kw)


# -------------------------------------------------------------------- sampling

def test_balanced_sampling_omega_extremes():
    pools = Pools(100)
    for i in range(5):
        pools.add(make_episode(success=True))
        pools.add(make_episode(success=False))
    rng = np.random.default_rng(0)
    assert all(e.success for e in balanced_sample(pools, 1.0, 50, rng))
    assert not any(e.success for e in balanced_sample(pools, 0.0, 50, rng))


def make_episode(success=True):
    from difflogic.tasks.episode import Episode
    return Episode("sorting", 2, (1, 0), actions=[0], rewards=[0.99],
                   success=success)


def test_balanced_sampling_fallback_and_errors():
    pools = Pools(10)
    rng = np.random.default_rng(0)
    with pytest.raises(ValueError):
        balanced_sample(pools, 0.5, 1, rng)
    pools.add(make_episode(success=True))
    drawn = balanced_sample(pools, 0.0, 20, rng)
    assert all(e.success for e in drawn)  # negative pool empty -> fallback


def test_balanced_sampling_law_of_large_numbers():
    pools = Pools(10)
    pools.add(make_episode(success=True))
    pools.add(make_episode(success=False))
    rng = np.random.default_rng(1)
    n = 10_000
    drawn = balanced_sample(pools, 0.5, n, rng)
    frac = sum(e.success for e in drawn) / n
    sigma = math.sqrt(0.25 / n)
    assert abs(frac - 0.5) <= 3 * sigma + 1e-9


def test_lesson_threshold_schedule():
    got = lesson_thresholds(7)
    np.testing.assert_allclose(got, [0.97, 0.975, 0.98, 0.985, 0.99, 0.995, 1.0])
    assert lesson_thresholds(1) == [1.0]


# ------------------------------------------------------------------- reinforce

def test_entropy_term_vanishes_for_deterministic_policy():
    sharp = ad.log_softmax(np.array([60.0, 0.0, 0.0]))
    probs = np.exp(sharp)
    entropy = -(probs * sharp).sum()
    assert abs(entropy) < 1e-20


def test_entropy_maximal_and_stationary_at_uniform():
    def entropy_of(logits):
        lp = ad.log_softmax(logits)
        return float(-(np.exp(lp) * lp).sum())

    uniform = np.zeros(4)
    h_uniform = entropy_of(uniform)
    assert h_uniform == pytest.approx(math.log(4), rel=1e-12)
    rng = np.random.default_rng(0)
    for _ in range(10):
        assert entropy_of(rng.normal(size=4)) <= h_uniform + 1e-12
    grads = finite_difference(lambda p: entropy_of(p["x"]), {"x": uniform.copy()})
    assert np.abs(grads["x"]).max() < 1e-8


def test_rewarded_action_probability_increases_monotonically():
    rng = np.random.default_rng(0)
    model = build_model("sorting", rng, depth=1)
    policy = ModelPolicy("sorting", model)
    env = make_env("sorting", 2, 0)
    action = 0
    ep = rollout_fixed(env, [action])
    cfg = small_cfg("sorting", beta=0.0, m_range=(2, 2))
    adam = AdamState(lr=cfg.lr)
    last = -np.inf
    for _ in range(8):
        p = policy.probabilities(make_env("sorting", 2, 0))[action]
        assert p > last
        last = p
        reinforce_update(policy, adam, ep, cfg)


def rollout_fixed(env, actions):
    from difflogic.tasks.episode import Episode
    ep = Episode(env.name, env.m, env.snapshot())
    for a in actions:
        ep.rewards.append(env.step(a))
        ep.actions.append(a)
    ep.success = env.done()
    return ep


def test_episode_objective_gradient_matches_finite_differences():
    rng = np.random.default_rng(3)
    model = build_model("blocksworld", rng, depth=1, channels=2)
    policy = ModelPolicy("blocksworld", model)
    env = make_env("blocksworld", 2, 5)
    agent = scripted_agent("blocksworld")
    episode = rollout(env, agent, rng, greedy=True)
    cfg = small_cfg("blocksworld", beta=0.01, aux_weight=0.1, m_range=(2, 2))

    node_model, leaves = as_nodes(model)
    loss = episode_loss(policy, node_model, episode, cfg)
    analytic = ad.grads_of(loss, leaves)

    from difflogic.machine import load_arrays

    def scalar(params):
        frozen = load_arrays(model, params)
        return float(ad.value_of(episode_loss(policy, frozen, episode, cfg)))

    numeric = finite_difference(scalar, named_arrays(model))
    err = max(rel_error(analytic[k], numeric[k]) for k in numeric)
    assert err <= 1e-4, f"max rel err {err}"


def test_update_direction_scales_linearly_with_returns():
    rng = np.random.default_rng(4)
    model = build_model("sorting", rng, depth=1)
    policy = ModelPolicy("sorting", model)
    env = make_env("sorting", 3, 2)
    agent = scripted_agent("sorting")
    episode = rollout(env, agent, rng, greedy=True)
    cfg = small_cfg("sorting", beta=0.0, m_range=(3, 3))

    def grads_for(scale):
        scaled = dataclasses.replace(episode)
        scaled.rewards = [r * scale for r in episode.rewards]
        node_model, leaves = as_nodes(model)
        loss = episode_loss(policy, node_model, scaled, cfg)
        return ad.grads_of(loss, leaves)

    g1 = grads_for(1.0)
    g3 = grads_for(3.0)
    for name in g1:
        np.testing.assert_allclose(g3[name], 3.0 * g1[name], rtol=1e-9, atol=1e-12)


def test_aux_loss_decomposition_and_uniform_value():
    rng = np.random.default_rng(5)
    model = build_model("blocksworld", rng, depth=1, channels=2)
    model.heads["validity"].w[:] = 0.0
    model.heads["validity"].b[:] = 0.0
    policy = ModelPolicy("blocksworld", model)
    env = make_env("blocksworld", 2, 1)
    agent = scripted_agent("blocksworld")
    episode = rollout(env, agent, rng, greedy=True)

    with_aux = small_cfg("blocksworld", beta=0.01, aux_weight=0.1, m_range=(2, 2))
    without = small_cfg("blocksworld", beta=0.01, aux_weight=0.0, m_range=(2, 2))
    total = float(ad.value_of(episode_loss(policy, model, episode, with_aux)))
    reinforce_part = float(ad.value_of(episode_loss(policy, model, episode, without)))
    # zeroed validity head predicts uniform: ln 2 per action per step
    expected_aux = 0.1 * math.log(2) * len(episode.actions)
    assert total == pytest.approx(reinforce_part + expected_aux, rel=1e-9)


def test_zero_probability_action_signals_failure():
    rng = np.random.default_rng(6)
    model = build_model("sorting", rng, depth=1)
    policy = ModelPolicy("sorting", model)
    env = make_env("sorting", 3, 2)
    episode = rollout_fixed(env, [0])
    model.heads["action"].w[:] = np.nan  # numerically failed parameters
    cfg = small_cfg("sorting", m_range=(3, 3))
    with pytest.raises(RuntimeError, match="zero probability"):
        episode_loss(policy, model, episode, cfg)


# ------------------------------------------------------------------ curriculum

class PerfectAgentPolicy:
    """Scripted agent presented through the policy interface."""

    def __init__(self, task):
        self.agent = scripted_agent(task)

    def act(self, env, rng=None, greedy=True):
        return self.agent.act(env, rng, greedy)


def test_perfect_agent_passes_every_lesson_in_one_exam():
    cfg = small_cfg("sorting", m_range=(3, 6), exam_episodes=30, max_epochs=3)
    rng = np.random.default_rng(0)
    report = curriculum_train(cfg, PerfectAgentPolicy("sorting"), rng)
    assert report.graduated
    assert all(lesson.passed and lesson.epochs == 1 for lesson in report.lessons)
    assert [lesson.m for lesson in report.lessons] == [3, 4, 5, 6]


def test_exam_draws_from_three_recent_lessons():
    cfg = small_cfg("sorting", m_range=(3, 7), exam_episodes=40, max_epochs=1)
    seen = []
    rng = np.random.default_rng(0)
    curriculum_train(cfg, PerfectAgentPolicy("sorting"), rng,
                     log=lambda rec: seen.append(rec["exam_m"]))
    assert seen[0] == [3]
    assert seen[1] == [3, 4]
    assert seen[2] == [3, 4, 5]
    assert seen[3] == [4, 5, 6]
    assert seen[4] == [5, 6, 7]


def test_run_exam_uses_requested_sizes(monkeypatch):
    sizes_seen = []
    original = rl_mod.make_env

    def spy(task, m, seed, **kw):
        sizes_seen.append(m)
        return original(task, m, seed, **kw)

    monkeypatch.setattr(rl_mod, "make_env", spy)
    rng = np.random.default_rng(1)
    acc, eps = run_exam(PerfectAgentPolicy("sorting"), "sorting", [4, 5], 30,
                        rng, {}, lesson=0)
    assert acc == 1.0
    assert set(sizes_seen) == {4, 5}
    assert all(e.success for e in eps)


def test_failed_lesson_produces_failure_report():
    class HopelessPolicy:
        def act(self, env, rng=None, greedy=True):
            return 0  # sorting action (0,1) forever

    cfg = small_cfg("sorting", m_range=(4, 5), exam_episodes=10,
                    rollout_episodes=0, opt_rounds=0, max_epochs=2)
    report = curriculum_train(cfg, HopelessPolicy(), np.random.default_rng(0))
    assert not report.graduated
    assert len(report.lessons) == 1
    assert not report.lessons[0].passed
    assert report.lessons[0].epochs == 2


def test_uniform_random_policy_completes_small_sorts_sometimes():
    result = evaluate(UniformRandomPolicy(), "sorting", 3, 1000, seed=0,
                      greedy=False)
    assert 0 < result["success_rate"] < 1


def test_bfs_reference_policy_is_perfect_on_path():
    result = evaluate(PerfectAgentPolicy("path"), "path", 10, 200, seed=1,
                      env_kwargs={"exact_distance": 4})
    assert result["success_rate"] == 1.0
    assert result["avg_moves"] == pytest.approx(4.0)


# ------------------------------------------------------------------ supervised

def test_supervised_single_batch_learns_constant_labels():
    base = SUPERVISED_TASKS["hasfather"]
    constant = dataclasses.replace(
        base, name="allfalse", labels=lambda tree: np.zeros(tree.m, dtype=bool))
    rng = np.random.default_rng(0)
    model = build_model("hasfather", rng, depth=2)
    cfg = SupervisedConfig(max_examples=160, batch=4)
    model, _, metrics = train_supervised(cfg, model, constant, 5, root_seed=3)
    assert metrics[-1]["loss"] < metrics[0]["loss"]
    assert accuracy(model, constant, 5, 10, root_seed=3) == 1.0


def test_supervised_training_is_deterministic():
    def run():
        rng = np.random.default_rng(0)
        model = build_model("hasfather", rng, depth=2)
        cfg = SupervisedConfig(max_examples=40, batch=4)
        model, _, metrics = train_supervised(cfg, model, SUPERVISED_TASKS["hasfather"],
                                             5, root_seed=1)
        return named_arrays(model), metrics[-1]["loss"]

    a_arrays, a_loss = run()
    b_arrays, b_loss = run()
    assert a_loss == b_loss
    for name in a_arrays:
        assert a_arrays[name].tobytes() == b_arrays[name].tobytes()


@pytest.mark.slow
def test_single_instance_overfit_reaches_threshold():
    base = SUPERVISED_TASKS["hasfather"]
    tree = base.generate(6, 123)
    frozen = dataclasses.replace(
        base, name="hasfather-frozen",
        generate=lambda m, seed: tree)
    rng = np.random.default_rng(0)
    model = build_model("hasfather", rng)
    cfg = SupervisedConfig(max_examples=4 * 5000, batch=4, loss_threshold=1e-6)
    model, _, metrics = train_supervised(cfg, model, frozen, 6, root_seed=0)
    assert metrics[-1]["loss"] < 1e-6
    assert metrics[-1]["step"] < 5000
