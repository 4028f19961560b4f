"""Round-counter pacing shared by every transport."""

from __future__ import annotations

import enum


class Pacing(enum.Enum):
    ACCEPT = "accept"
    DEFER = "defer"
    REJECT = "reject"


def pacing_check(local_round: int, packet_round: int) -> Pacing:
    """Accept same-round packets, defer exactly one round ahead, reject the rest."""
    if packet_round == local_round:
        return Pacing.ACCEPT
    if packet_round == local_round + 1:
        return Pacing.DEFER
    return Pacing.REJECT
