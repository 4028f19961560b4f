"""Multi-round driver over the simulated network and the trace it produces."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from .codec import SignedOverflowError
from .oracles import disagreement, weight_matrix
from .protocol import NodeState, RoundRecord, run_round
from .topology import TopologySchedule
from .transport.sim import SimNetwork

CONVERGED = "converged"
DIVERGED = "diverged"
MAX_ROUNDS = "max-rounds"


@dataclass
class RunTrace:
    num_nodes: int
    epsilon: float
    weight_scale: int
    state_scale: int
    records: list[RoundRecord] = field(default_factory=list)
    final_states: list[float] = field(default_factory=list)
    status: str = MAX_ROUNDS

    @property
    def rounds(self) -> int:
        return len(self.records)

    def states(self) -> np.ndarray:
        """All states ``x[0..K]`` as a (K+1, M) array (final row included)."""
        rows = [r.states for r in self.records] + [self.final_states]
        return np.array(rows, dtype=float)

    def multipliers(self, k: int) -> list[float]:
        """Real-valued multipliers ``a_i[k]`` of round ``k``."""
        return [a / self.weight_scale for a in self.records[k].multipliers]

    def difference(self, k: int, node: int, neighbor: int) -> float:
        """Real value of the weighted difference ``node`` decrypted from ``neighbor`` in round ``k``."""
        return self.records[k].diffs[(node, neighbor)] / (self.state_scale * self.weight_scale**2)

    def weight_schedule(self) -> list[np.ndarray]:
        """Per-round symmetric weights ``a_i a_j`` exactly as the encrypted run used them."""
        out = []
        s2 = self.weight_scale**2
        for rec in self.records:
            a = rec.multipliers
            out.append(weight_matrix(self.num_nodes, {(i, j): a[i] * a[j] / s2 for i, j in rec.edges}))
        return out


def simulate(
    nodes: Sequence[NodeState],
    schedule: TopologySchedule,
    max_rounds: int,
    stop_threshold: float | None = None,
    network: SimNetwork | None = None,
    divergence_factor: float = 1e6,
) -> RunTrace:
    """Run rounds until disagreement drops below ``stop_threshold`` or ``max_rounds``.

    A run whose disagreement grows past ``divergence_factor`` times its initial
    value (or overflows the signed window) stops with status ``diverged``.
    """
    network = SimNetwork() if network is None else network
    params = nodes[0].params
    trace = RunTrace(len(nodes), params.epsilon, params.codec.weight_scale, params.codec.state_scale)
    initial = disagreement([n.x for n in nodes])
    for _ in range(max_rounds):
        current = disagreement([n.x for n in nodes])
        if stop_threshold is not None and current < stop_threshold:
            trace.status = CONVERGED
            break
        if initial > 0 and current > divergence_factor * initial:
            trace.status = DIVERGED
            break
        try:
            trace.records.append(run_round(nodes, schedule, network))
        except SignedOverflowError:
            trace.status = DIVERGED
            break
    else:
        if stop_threshold is not None and disagreement([n.x for n in nodes]) < stop_threshold:
            trace.status = CONVERGED
    trace.final_states = [n.x for n in nodes]
    return trace
