"""Node-capacitated mode: group partition, round-robin broadcast schedules,
and per-round message-capacity enforcement.

Groups are contiguous blocks of the sorted index order, at most ceil(log2 n)
members each, giving G = ceil(n / ceil(log2 n)) groups. With G == 1 every
schedule degenerates to the all-to-all behavior of the uncapacitated model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = ["GroupLayout", "enforce_capacity", "log2_ceil"]


def log2_ceil(n: int) -> int:
    """ceil(log2 n), floored at 1 so capacities stay positive."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return max(1, math.ceil(math.log2(n)))


@dataclass(frozen=True)
class GroupLayout:
    """Partition of node indexes 1..n into G contiguous groups."""

    n: int
    group_size: int
    group_count: int

    @classmethod
    def for_clique(cls, n: int) -> "GroupLayout":
        size = log2_ceil(n)
        return cls(n=n, group_size=size, group_count=math.ceil(n / size))

    def group_of(self, index: int) -> int:
        """1-based group id of a node index."""
        return (index - 1) // self.group_size + 1

    def members(self, group: int) -> range:
        lo = (group - 1) * self.group_size + 1
        hi = min(group * self.group_size, self.n)
        return range(lo, hi + 1)

    def phase1_dest(self, group: int, sweep_round: int) -> int:
        """Destination group for a sender group in round-robin sweep round
        (0-based within the sweep): dest = ((r + j) mod G) + 1.
        """
        return (sweep_round + group) % self.group_count + 1

    def allokay_order(self, group: int) -> list[int]:
        """Group visit order for a staggered termination broadcast: own group
        first, wrapping around.
        """
        g = self.group_count
        return [(group - 1 + k) % g + 1 for k in range(g)]


def enforce_capacity(
    mailbox: list, limit: int, sender_of=lambda msg: msg.sender
) -> tuple[list, list]:
    """Split an over-full mailbox into (kept, dropped).

    Messages are kept in ascending sender-index order up to the limit; the
    deterministic rule makes overflow behavior replayable.
    """
    if len(mailbox) <= limit:
        return mailbox, []
    ordered = sorted(mailbox, key=sender_of)
    return ordered[:limit], ordered[limit:]
