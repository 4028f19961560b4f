"""Undirected, possibly time-varying interaction graphs."""

from __future__ import annotations

import random
from collections.abc import Iterable, Sequence

Edge = tuple[int, int]


def norm_edge(i: int, j: int) -> Edge:
    if i == j:
        raise ValueError(f"self-loop on node {i}")
    return (i, j) if i < j else (j, i)


class TopologySchedule:
    """Per-round undirected edge sets.

    ``rounds`` is repeated periodically: round ``k`` uses
    ``rounds[k % len(rounds)]``. A static graph is a schedule of period one.
    """

    def __init__(self, num_nodes: int, rounds: Sequence[Iterable[Sequence[int]]]):
        if num_nodes < 1:
            raise ValueError("need at least one node")
        if not rounds:
            raise ValueError("schedule needs at least one round")
        self.num_nodes = num_nodes
        self.rounds: list[frozenset[Edge]] = []
        for edges in rounds:
            normed = frozenset(norm_edge(int(i), int(j)) for i, j in edges)
            for i, j in normed:
                if not (0 <= i < num_nodes and 0 <= j < num_nodes):
                    raise ValueError(f"edge ({i}, {j}) references a missing node")
            self.rounds.append(normed)

    @classmethod
    def static(cls, num_nodes: int, edges: Iterable[Sequence[int]]) -> "TopologySchedule":
        return cls(num_nodes, [list(edges)])

    @property
    def period(self) -> int:
        return len(self.rounds)

    def edges_at(self, k: int) -> list[Edge]:
        return sorted(self.rounds[k % self.period])

    def neighbors_at(self, node: int, k: int) -> list[int]:
        return sorted(j if i == node else i for i, j in self.rounds[k % self.period] if node in (i, j))

    def max_degree(self) -> int:
        best = 0
        for edges in self.rounds:
            deg = [0] * self.num_nodes
            for i, j in edges:
                deg[i] += 1
                deg[j] += 1
            best = max(best, max(deg))
        return best

    def union_edges(self, start: int = 0, window: int | None = None) -> set[Edge]:
        window = self.period if window is None else window
        out: set[Edge] = set()
        for k in range(start, start + window):
            out |= self.rounds[k % self.period]
        return out

    def union_connected(self, window: int | None = None) -> bool:
        """True if every ``window``-round union (default: one period) is connected."""
        window = self.period if window is None else window
        return all(
            is_connected(self.num_nodes, self.union_edges(s, window)) for s in range(self.period)
        )

    def to_dict(self) -> dict:
        return {"num_nodes": self.num_nodes, "rounds": [[list(e) for e in sorted(r)] for r in self.rounds]}

    @classmethod
    def from_dict(cls, data: dict) -> "TopologySchedule":
        return cls(int(data["num_nodes"]), data["rounds"])

    def __eq__(self, other):
        return (
            isinstance(other, TopologySchedule)
            and self.num_nodes == other.num_nodes
            and self.rounds == other.rounds
        )

    def __repr__(self):
        return f"TopologySchedule(num_nodes={self.num_nodes}, period={self.period})"


def is_connected(num_nodes: int, edges: Iterable[Edge]) -> bool:
    adj: dict[int, list[int]] = {v: [] for v in range(num_nodes)}
    for i, j in edges:
        adj[i].append(j)
        adj[j].append(i)
    seen = {0}
    stack = [0]
    while stack:
        v = stack.pop()
        for u in adj[v]:
            if u not in seen:
                seen.add(u)
                stack.append(u)
    return len(seen) == num_nodes


def ring(num_nodes: int) -> list[Edge]:
    if num_nodes < 3:
        return [(0, 1)] if num_nodes == 2 else []
    return sorted(norm_edge(i, (i + 1) % num_nodes) for i in range(num_nodes))


def line(num_nodes: int) -> list[Edge]:
    return [(i, i + 1) for i in range(num_nodes - 1)]


def ring_with_chord(num_nodes: int) -> list[Edge]:
    """Ring plus one chord between node 0 and the opposite node."""
    edges = set(ring(num_nodes))
    if num_nodes >= 4:
        edges.add(norm_edge(0, num_nodes // 2))
    return sorted(edges)


def random_connected(num_nodes: int, rng: random.Random, extra_edge_prob: float = 0.3) -> list[Edge]:
    """Random spanning tree plus independently sampled extra edges."""
    order = list(range(num_nodes))
    rng.shuffle(order)
    edges = {norm_edge(order[i], order[rng.randrange(i)]) for i in range(1, num_nodes)}
    for i in range(num_nodes):
        for j in range(i + 1, num_nodes):
            if (i, j) not in edges and rng.random() < extra_edge_prob:
                edges.add((i, j))
    return sorted(edges)


def alternating_halves(edges: Sequence[Edge]) -> TopologySchedule:
    """Split ``edges`` into two rounds that alternate; only their union must connect."""
    edges = sorted(edges)
    num_nodes = max(max(e) for e in edges) + 1
    return TopologySchedule(num_nodes, [edges[0::2], edges[1::2]])
