"""Random geometric graphs and the graph reasoning targets."""

from dataclasses import dataclass

import numpy as np

from ..predtensor import from_values

N_COLORS = 4
RED = 0


@dataclass
class Graph:
    edges: np.ndarray    # (m, m) bool, no self loops
    colors: np.ndarray   # (m,) ints < N_COLORS
    coords: np.ndarray   # (m, 2) generation points

    @property
    def m(self) -> int:
        return self.edges.shape[0]


def gen_graph(m: int, out_degree: tuple, seed, undirected: bool = False) -> Graph:
    """m points on the unit square; node i connects to its k_i nearest
    neighbours, k_i uniform over `out_degree`; undirected symmetrizes."""
    if m < 2:
        raise ValueError("need at least two nodes")
    k_min, k_max = out_degree
    if k_max >= m:
        raise ValueError(f"out-degree {k_max} >= node count {m}")
    rng = np.random.default_rng(seed)
    coords = rng.random((m, 2))
    ks = rng.integers(k_min, k_max + 1, size=m)
    diff = coords[:, None, :] - coords[None, :, :]
    dist = np.sqrt((diff ** 2).sum(-1))
    np.fill_diagonal(dist, np.inf)
    edges = np.zeros((m, m), dtype=bool)
    for i in range(m):
        nearest = np.argsort(dist[i], kind="stable")
        edges[i, nearest[: ks[i]]] = True
    if undirected:
        edges |= edges.T
    colors = rng.integers(N_COLORS, size=m)
    return Graph(edges, colors, coords)


def encode_premises(graph: Graph) -> dict:
    one_hot = np.zeros((graph.m, N_COLORS))
    one_hot[np.arange(graph.m), graph.colors] = 1.0
    return {
        1: from_values(graph.m, 1, one_hot),
        2: from_values(graph.m, 2, graph.edges[..., None].astype(float)),
    }


INPUT_CHANNELS = {1: N_COLORS, 2: 1}


def bfs_distances(edges: np.ndarray, source: int) -> np.ndarray:
    m = edges.shape[0]
    dist = np.full(m, -1, dtype=np.int64)
    dist[source] = 0
    frontier = [source]
    d = 0
    while frontier:
        d += 1
        nxt = []
        for u in frontier:
            for v in np.flatnonzero(edges[u]):
                if dist[v] < 0:
                    dist[v] = d
                    nxt.append(v)
        frontier = nxt
    return dist


def graph_labels(graph: Graph, target: str) -> np.ndarray:
    if target == "adjacenttored":
        red = graph.colors == RED
        return (graph.edges & red[None, :]).any(axis=1)
    if target.endswith("connectivity"):
        k = int(target[: -len("connectivity")])
        out = np.zeros((graph.m, graph.m), dtype=bool)
        for s in range(graph.m):
            dist = bfs_distances(graph.edges, s)
            out[s] = (dist >= 0) & (dist <= k)
        np.fill_diagonal(out, False)
        return out
    if target.endswith("outdegree"):
        k = int(target[: -len("outdegree")])
        return graph.edges.sum(axis=1) == k
    raise KeyError(f"unknown graph target {target!r}")


def floyd_warshall(edges: np.ndarray) -> np.ndarray:
    """Independent all-pairs distance oracle."""
    m = edges.shape[0]
    dist = np.where(edges, 1.0, np.inf)
    np.fill_diagonal(dist, 0.0)
    for k in range(m):
        dist = np.minimum(dist, dist[:, k][:, None] + dist[k, :][None, :])
    return dist
