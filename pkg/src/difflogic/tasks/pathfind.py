"""Single-source single-target path finding on undirected graphs.

The agent picks the next node each step; the move happens only if an edge
exists. The step limit is the shortest-path distance of the instance, so
only a shortest path completes the episode.
"""

import numpy as np

from ..predtensor import from_values
from .graphs import bfs_distances, gen_graph

STEP_REWARD = -0.01
SUCCESS_REWARD = 1.0


class PathEnv:
    name = "path"

    def __init__(self, edges, start: int, target: int):
        self.edges = np.asarray(edges, dtype=bool)
        self.start = int(start)
        self.target = int(target)
        self.current = int(start)
        self.steps = 0
        dist = bfs_distances(self.edges, self.start)
        if dist[self.target] < 0:
            raise ValueError("target unreachable")
        self.distance = int(dist[self.target])
        self.step_limit = self.distance
        self.actions = list(range(self.edges.shape[0]))

    @classmethod
    def generate(cls, m: int, seed, max_distance: int = 5,
                 exact_distance: int | None = None,
                 out_degree: tuple = (1, 3),
                 balanced: bool = False, bias: int = 2) -> "PathEnv":
        """Rejection-sample graphs until a (start, target) pair at an
        admissible distance exists. With `balanced`, draw the wanted distance
        as the max of `bias` uniform draws over [1, max_distance] and hunt
        for a graph offering it (relaxing downward after repeated misses):
        long paths carry most of the learning signal but are rare under the
        natural distribution."""
        rng = np.random.default_rng(seed)
        wanted = None
        if balanced and exact_distance is None:
            wanted = int(max(rng.integers(1, max_distance + 1)
                             for _ in range(max(bias, 1))))
        misses = 0
        while True:
            graph = gen_graph(m, out_degree, rng.integers(2 ** 63), undirected=True)
            start = int(rng.integers(m))
            dist = bfs_distances(graph.edges, start)
            if exact_distance is not None:
                ok = np.flatnonzero(dist == exact_distance)
            elif wanted is not None:
                ok = np.flatnonzero(dist == wanted)
                if not ok.size:
                    misses += 1
                    if misses >= 25 and wanted > 1:
                        wanted -= 1
                        misses = 0
            else:
                ok = np.flatnonzero((dist >= 1) & (dist <= max_distance))
            if ok.size:
                target = int(ok[int(rng.integers(ok.size))])
                return cls(graph.edges, start, target)

    @classmethod
    def from_snapshot(cls, snapshot) -> "PathEnv":
        edges, start, target = snapshot
        return cls(np.asarray(edges, dtype=bool), start, target)

    def snapshot(self):
        return (self.edges.copy(), self.start, self.target)

    @property
    def m(self) -> int:
        return self.edges.shape[0]

    def done(self) -> bool:
        return self.current == self.target

    def observe(self) -> dict:
        marks = np.zeros((self.m, 2))
        marks[self.current, 0] = 1.0  # where the walk currently stands
        marks[self.target, 1] = 1.0
        return {
            1: from_values(self.m, 1, marks),
            2: from_values(self.m, 2, self.edges[..., None].astype(float)),
        }

    def step(self, action: int) -> float:
        nxt = self.actions[action]
        if self.edges[self.current, nxt]:
            self.current = nxt
        self.steps += 1
        return STEP_REWARD + (SUCCESS_REWARD if self.done() else 0.0)


INPUT_CHANNELS = {1: 2, 2: 1}


class ShortestPathAgent:
    """Scripted reference policy: BFS from the target, walk downhill."""

    def act(self, env: PathEnv, rng=None, greedy: bool = True) -> int:
        dist = bfs_distances(env.edges, env.target)
        here = dist[env.current]
        for nxt in np.flatnonzero(env.edges[env.current]):
            if 0 <= dist[nxt] < here:
                return int(nxt)
        return int(env.current)
