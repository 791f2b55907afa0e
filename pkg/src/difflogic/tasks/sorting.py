"""Sorting as an environment: swap elements until the array is ascending."""

import numpy as np

from ..machine import ordered_pairs
from ..predtensor import from_values

STEP_REWARD = -0.01
SUCCESS_REWARD = 1.0


class SortingEnv:
    name = "sorting"

    def __init__(self, array):
        self.initial = tuple(int(v) for v in array)
        self.array = list(self.initial)
        self.steps = 0
        self.actions = ordered_pairs(len(self.array))
        self.step_limit = 2 * len(self.array)

    @classmethod
    def generate(cls, m: int, seed) -> "SortingEnv":
        rng = np.random.default_rng(seed)
        array = rng.permutation(m)
        while np.all(array[:-1] <= array[1:]):
            array = rng.permutation(m)
        return cls(array)

    @classmethod
    def from_snapshot(cls, snapshot) -> "SortingEnv":
        return cls(snapshot)

    def snapshot(self):
        return self.initial

    @property
    def m(self) -> int:
        return len(self.array)

    def done(self) -> bool:
        return all(self.array[i] <= self.array[i + 1] for i in range(self.m - 1))

    def observe(self) -> dict:
        idx = np.arange(self.m)
        val = np.asarray(self.array)
        channels = np.stack([
            idx[:, None] < idx[None, :],
            idx[:, None] == idx[None, :],
            idx[:, None] > idx[None, :],
            val[:, None] < val[None, :],
            val[:, None] == val[None, :],
            val[:, None] > val[None, :],
        ], axis=-1).astype(float)
        return {2: from_values(self.m, 2, channels)}

    def step(self, action: int) -> float:
        i, j = self.actions[action]
        self.array[i], self.array[j] = self.array[j], self.array[i]
        self.steps += 1
        return STEP_REWARD + (SUCCESS_REWARD if self.done() else 0.0)


INPUT_CHANNELS = {2: 6}


class SelectionSortAgent:
    """Scripted reference policy: swap the minimum of the unsorted prefix
    boundary into place."""

    def act(self, env: SortingEnv, rng=None, greedy: bool = True) -> int:
        a = env.array
        for i in range(env.m):
            j = int(np.argmin(a[i:])) + i
            if j != i:
                return env.actions.index((i, j))
        return 0
