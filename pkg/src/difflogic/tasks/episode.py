"""Episode records for the decision-making tasks."""

from dataclasses import dataclass, field


@dataclass
class Episode:
    task: str
    m: int
    snapshot: object          # enough to rebuild the environment for replay
    actions: list = field(default_factory=list)
    rewards: list = field(default_factory=list)
    success: bool = False
    lesson: int = -1

    def returns(self, gamma: float) -> list:
        """Discounted returns v_t = r_t + gamma * v_{t+1}."""
        out = [0.0] * len(self.rewards)
        acc = 0.0
        for t in range(len(self.rewards) - 1, -1, -1):
            acc = self.rewards[t] + gamma * acc
            out[t] = acc
        return out

    @property
    def moves(self) -> int:
        return len(self.actions)


def rollout(env, policy, rng, greedy: bool, lesson: int = -1) -> Episode:
    """Play one episode to completion or the environment's step limit."""
    episode = Episode(env.name, env.m, env.snapshot(), lesson=lesson)
    while not env.done() and env.steps < env.step_limit:
        action = policy.act(env, rng, greedy)
        reward = env.step(action)
        episode.actions.append(action)
        episode.rewards.append(reward)
    episode.success = env.done()
    return episode
