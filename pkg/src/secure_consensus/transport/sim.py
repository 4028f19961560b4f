"""Deterministic in-memory network.

Single-threaded and event ordered: :meth:`SimNetwork.deliver` hands out every
queued packet of the lowest pending round, in send order, before anything of a
later round. Hooks see each packet on its way and may replace it, which is how
the adversary lab eavesdrops and tampers.
"""

from __future__ import annotations

import random
from collections.abc import Callable
from dataclasses import dataclass, field

from .wire import Packet

Hook = Callable[[Packet, int], Packet]


@dataclass(frozen=True)
class Delivery:
    packet: Packet
    original: Packet
    attempt: int
    seq: int

    @property
    def tampered(self) -> bool:
        return self.packet != self.original


@dataclass
class TamperRecord:
    round: int
    sender: int
    receiver: int
    attempt: int


@dataclass
class SimNetwork:
    drop_probability: float = 0.0
    rng: random.Random = field(default_factory=lambda: random.Random(0))
    hooks: list[Hook] = field(default_factory=list)
    tampered: list[TamperRecord] = field(default_factory=list)
    sent: int = 0
    dropped: int = 0
    _queue: list[tuple[int, int, Packet, int]] = field(default_factory=list)
    _seq: int = 0

    def add_hook(self, hook: Hook) -> None:
        self.hooks.append(hook)

    def send(self, packet: Packet, attempt: int = 0) -> None:
        self._queue.append((packet.round, self._seq, packet, attempt))
        self._seq += 1
        self.sent += 1

    def retransmit(self, delivery: Delivery) -> None:
        """Re-send the original bytes of ``delivery`` (lossless re-request)."""
        self.send(delivery.original, delivery.attempt + 1)

    @property
    def idle(self) -> bool:
        return not self._queue

    def deliver(self) -> list[Delivery]:
        """Deliver every queued packet of the earliest pending round."""
        if not self._queue:
            return []
        self._queue.sort(key=lambda item: (item[0], item[1]))
        first = self._queue[0][0]
        batch = [item for item in self._queue if item[0] == first]
        self._queue = [item for item in self._queue if item[0] != first]
        out = []
        for _, seq, packet, attempt in batch:
            if self.drop_probability and self.rng.random() < self.drop_probability:
                self.dropped += 1
                continue
            delivered = packet
            for hook in self.hooks:
                delivered = hook(delivered, attempt)
            if delivered != packet:
                self.tampered.append(TamperRecord(packet.round, packet.sender, packet.receiver, attempt))
            out.append(Delivery(delivered, packet, attempt, seq))
        return out
