"""Two-world blocks environment: move blocks until the operating world's
coordinates match the target world's.

Objects are ids 0..m with 0 = ground, fixed at (0, 0). A block directly on
the ground occupies column x = its own id (the same disambiguation rule the
Move action applies), so coordinate equality is exactly structural equality
and every instance is solvable. Move(i, j) takes effect only when i is
moveable and j placeable; invalid moves change nothing but still cost the
step penalty.
"""

import numpy as np

from .. import logic
from ..blocks_rules import COMPARISON_RELATIONS, shouldmove_fixture
from ..machine import ordered_pairs
from ..predtensor import from_values

STEP_REWARD = -0.01
SUCCESS_REWARD = 1.0


def random_world(m: int, rng: np.random.Generator) -> dict:
    """Random forest of stacks in canonical coordinates: id -> (x, y)."""
    pos = {}
    stacks: list = []
    for b in rng.permutation(np.arange(1, m + 1)):
        b = int(b)
        if stacks and rng.random() < 0.5:
            stack = stacks[int(rng.integers(len(stacks)))]
            stack.append(b)
        else:
            stacks.append([b])
    for stack in stacks:
        x = stack[0]
        for height, b in enumerate(stack, start=1):
            pos[b] = (x, height)
    pos[0] = (0, 0)
    return pos


class BlocksEnv:
    name = "blocksworld"

    def __init__(self, n_blocks: int, operating: dict, target: dict):
        self.n_blocks = n_blocks
        self.operating = dict(operating)
        self.target = dict(target)
        self.steps = 0
        self.actions = ordered_pairs(n_blocks + 1)  # (i, j) over object ids
        self.step_limit = 4 * n_blocks

    @classmethod
    def generate(cls, m: int, seed) -> "BlocksEnv":
        rng = np.random.default_rng(seed)
        operating = random_world(m, rng)
        target = random_world(m, rng)
        while m > 1 and target == operating:
            target = random_world(m, rng)
        return cls(m, operating, target)

    @classmethod
    def from_snapshot(cls, snapshot) -> "BlocksEnv":
        n_blocks, operating, target = snapshot
        return cls(n_blocks, dict(operating), dict(target))

    def snapshot(self):
        return (self.n_blocks, dict(self.operating), dict(self.target))

    @property
    def m(self) -> int:
        # object count the policy sees: both worlds, ground included
        return 2 * (self.n_blocks + 1)

    def done(self) -> bool:
        return self.operating == self.target

    def _occupied(self) -> dict:
        return {xy: b for b, xy in self.operating.items() if b != 0}

    def moveable(self, i: int) -> bool:
        if i == 0:
            return False
        x, y = self.operating[i]
        return (x, y + 1) not in self._occupied()

    def placeable(self, j: int) -> bool:
        if j == 0:
            return True
        x, y = self.operating[j]
        return (x, y + 1) not in self._occupied()

    def validity(self) -> np.ndarray:
        return np.asarray(
            [self.moveable(i) and self.placeable(j) for i, j in self.actions]
        )

    def step(self, action: int) -> float:
        i, j = self.actions[action]
        if self.moveable(i) and self.placeable(j):
            if j == 0:
                self.operating[i] = (i, 1)
            else:
                x, y = self.operating[j]
                self.operating[i] = (x, y + 1)
        self.steps += 1
        return STEP_REWARD + (SUCCESS_REWARD if self.done() else 0.0)

    def _object_table(self):
        n = self.n_blocks + 1
        world = np.repeat([0, 1], n)
        ids = np.tile(np.arange(n), 2)
        xs = np.empty(2 * n)
        ys = np.empty(2 * n)
        for k in range(n):
            xs[k], ys[k] = self.operating[k]
            xs[n + k], ys[n + k] = self.target[k]
        return world, ids, xs, ys

    def _relations(self) -> dict:
        world, ids, xs, ys = self._object_table()
        return {
            "SameWorldID": world[:, None] == world[None, :],
            "SmallerWorldID": world[:, None] < world[None, :],
            "LargerWorldID": world[:, None] > world[None, :],
            "SameID": ids[:, None] == ids[None, :],
            "SmallerID": ids[:, None] < ids[None, :],
            "LargerID": ids[:, None] > ids[None, :],
            "Left": xs[:, None] < xs[None, :],
            "SameX": xs[:, None] == xs[None, :],
            "Right": xs[:, None] > xs[None, :],
            "Below": ys[:, None] < ys[None, :],
            "SameY": ys[:, None] == ys[None, :],
            "Above": ys[:, None] > ys[None, :],
        }

    def observe(self) -> dict:
        rel = self._relations()
        stacked = np.stack(
            [rel[name] for name in COMPARISON_RELATIONS], axis=-1
        ).astype(float)
        return {2: from_values(self.m, 2, stacked)}

    def factset(self) -> logic.FactSet:
        facts = logic.FactSet(self.m)
        for name, grounding in self._relations().items():
            facts.add(name, 2, grounding)
        return facts


INPUT_CHANNELS = {2: len(COMPARISON_RELATIONS)}


def shouldmove_labels(env: BlocksEnv) -> np.ndarray:
    """Oracle per-object labels from the rule fixture."""
    derived = logic.forward_chain(shouldmove_fixture(), env.factset())
    return derived.facts["ShouldMove"]


class BlocksPlannerAgent:
    """Scripted reference policy: place blocks onto finished target support
    chains when possible, otherwise unstack something unfinished."""

    def act(self, env: BlocksEnv, rng=None, greedy: bool = True) -> int:
        target_at = {xy: b for b, xy in env.target.items() if b != 0}

        def well_placed(b: int) -> bool:
            if b == 0:
                return True
            if env.operating[b] != env.target[b]:
                return False
            x, y = env.target[b]
            below = target_at.get((x, y - 1), 0) if y > 1 else 0
            return well_placed(below)

        for b in range(1, env.n_blocks + 1):
            if well_placed(b) or not env.moveable(b):
                continue
            tx, ty = env.target[b]
            if ty == 1:
                return env.actions.index((b, 0))
            support = target_at[(tx, ty - 1)]
            if well_placed(support) and env.placeable(support):
                return env.actions.index((b, support))
        for b in range(1, env.n_blocks + 1):
            if env.moveable(b) and not well_placed(b) and env.operating[b][1] > 1:
                return env.actions.index((b, 0))
        # unreachable for consistent states; burn a step rather than crash
        for b in range(1, env.n_blocks + 1):
            if env.moveable(b):
                return env.actions.index((b, 0))
        return 0
