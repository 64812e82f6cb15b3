"""Bounded single-producer single-consumer queue.

Monotonic produce/consume counters over a fixed ring.  The producer owns
``_prod``, the consumer owns ``_cons``; each side only reads the other's
counter, so no read-modify-write races exist and both operations are a
bounded number of plain loads and stores (no retries, no blocking).
Caller contract: at most one producer and one consumer at a time; the
scheduler enforces this externally.
"""

from __future__ import annotations

from typing import Any, Optional

__all__ = ["SpscQueue"]


class SpscQueue:
    __slots__ = ("capacity", "_buf", "_prod", "_cons")

    def __init__(self, capacity: int) -> None:
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self._buf: list[Any] = [None] * capacity
        self._prod = 0
        self._cons = 0

    def push(self, item: Any) -> bool:
        """Producer only.  False iff the queue is full."""
        prod = self._prod
        if prod - self._cons == self.capacity:
            return False
        self._buf[prod % self.capacity] = item
        # counter published after the slot so the consumer never reads
        # an unwritten cell
        self._prod = prod + 1
        return True

    def pop(self) -> Optional[Any]:
        """Consumer only.  Oldest item, or None when empty."""
        cons = self._cons
        if self._prod == cons:
            return None
        slot = cons % self.capacity
        item = self._buf[slot]
        self._buf[slot] = None
        self._cons = cons + 1
        return item

    def __len__(self) -> int:
        """Racy size estimate; exact when called by the only mutator."""
        return self._prod - self._cons
