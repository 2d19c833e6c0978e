"""Unweighted graphs, Erdos-Renyi instance generation and an exact Max-Cut oracle."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from diffqaoa.errors import CapacityError, ParameterError
from diffqaoa.rng import derive_seed, make_rng

MAX_BRUTE_FORCE_NODES = 24


@dataclass(frozen=True)
class Graph:
    """Undirected unweighted graph on nodes ``0..n-1``.

    Edges are stored as a sorted tuple of ``(i, j)`` pairs with ``i < j``;
    use :meth:`from_edges` to build one from arbitrary pairs.
    """

    n: int
    edges: tuple[tuple[int, int], ...]

    def __post_init__(self):
        if self.n < 1:
            raise ParameterError(f"node count must be positive, got {self.n}")
        prev = None
        for e in self.edges:
            i, j = e
            if not (0 <= i < j < self.n):
                raise ParameterError(f"edge {e} is not canonical for n={self.n}")
            if prev is not None and e <= prev:
                raise ParameterError("edges must be sorted and unique")
            prev = e

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[Sequence[int]]) -> Graph:
        canon = set()
        for e in edges:
            i, j = int(e[0]), int(e[1])
            if i == j:
                raise ParameterError(f"self-loop on node {i}")
            if not (0 <= i < n and 0 <= j < n):
                raise ParameterError(f"edge ({i}, {j}) out of range for n={n}")
            canon.add((min(i, j), max(i, j)))
        return cls(int(n), tuple(sorted(canon)))

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def edge_array(self) -> np.ndarray:
        return np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)

    def to_dict(self) -> dict:
        return {"n": self.n, "edges": [list(e) for e in self.edges]}

    @classmethod
    def from_dict(cls, d: dict) -> Graph:
        return cls(int(d["n"]), tuple((int(i), int(j)) for i, j in d["edges"]))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"))

    @classmethod
    def from_json(cls, s: str) -> Graph:
        return cls.from_dict(json.loads(s))


@dataclass(frozen=True)
class CutResult:
    max_cut_value: int
    witness: tuple[int, ...]
    ground_energy: int


def generate_random_graph(n: int, p_edge: float, seed: int) -> Graph:
    """Sample G(n, p_edge), resampling with derived seeds until the graph has an edge."""
    if n < 2:
        raise ParameterError(f"need at least 2 nodes, got {n}")
    if not (0.0 < p_edge <= 1.0):
        # p_edge == 0 would resample forever
        raise ParameterError(f"p_edge must lie in (0, 1], got {p_edge}")
    iu, ju = np.triu_indices(n, k=1)
    attempt = 0
    while True:
        s = seed if attempt == 0 else derive_seed(seed, attempt)
        keep = make_rng(s).random(iu.size) < p_edge
        if keep.any():
            return Graph(n, tuple(zip(iu[keep].tolist(), ju[keep].tolist())))
        attempt += 1


def cut_value(g: Graph, assignment: Sequence[int]) -> int:
    bits = np.asarray(assignment, dtype=np.int64)
    if bits.shape != (g.n,):
        raise ParameterError(f"assignment length {bits.size} does not match n={g.n}")
    if g.num_edges == 0:
        return 0
    e = g.edge_array()
    return int(np.count_nonzero(bits[e[:, 0]] != bits[e[:, 1]]))


def _all_cut_values(g: Graph, count: int) -> np.ndarray:
    # entry k: number of edges cut by the assignment whose bit i is bit i of k
    k = np.arange(count, dtype=np.int64)
    cuts = np.zeros(k.size, dtype=np.int64)
    for i, j in g.edges:
        cuts += ((k >> i) ^ (k >> j)) & 1
    return cuts


def brute_force_maxcut(g: Graph) -> CutResult:
    """Exact Max-Cut by enumerating the 2^(n-1) bipartitions with node ``n-1`` pinned to side 0.

    ``ground_energy`` is the minimum of sum_{(i,j) in E} s_i s_j over spins,
    which equals ``|E| - 2 * max_cut_value``.
    """
    if g.n > MAX_BRUTE_FORCE_NODES:
        raise CapacityError(f"brute force limited to n <= {MAX_BRUTE_FORCE_NODES}, got {g.n}")
    # the top node's bit is zero for every k < 2^(n-1); complements give the other half
    cuts = _all_cut_values(g, 1 << (g.n - 1))
    best = int(np.argmax(cuts))
    value = int(cuts[best])
    witness = tuple((best >> i) & 1 for i in range(g.n))
    return CutResult(value, witness, g.num_edges - 2 * value)
