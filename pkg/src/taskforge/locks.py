"""Fair ticket locks with per-waiter wake slots, plus a delegation variant.

Both locks hand out monotonically increasing tickets from an atomic
``head`` counter.  ``tail`` is one past the ticket currently allowed in,
so the lock is free exactly when ``tail == head + 1``.  A waiter holding
ticket t polls only its own slot ``waitq[t % size]``; release publishes
the next ticket number into the next slot, waking exactly one waiter.

The delegation variant additionally lets the current owner complete
waiting callers' requests for them, in FIFO order, without ever passing
ownership: waiters register themselves in ``logq`` and receive results
through per-caller ``readyq`` slots.

Waiting is implemented as bounded-interval polling rather than a raw
busy loop: a spinning thread that never sleeps starves the lock holder
of the interpreter lock.  Sleep intervals grow with the waiter's queue
position, so the next thread in line polls every quantum while threads
far back poll rarely.
"""

from __future__ import annotations

import time
from typing import Any

from .atomics import AtomicInt

__all__ = [
    "ACQUIRED",
    "DELEGATED",
    "PartitionedTicketLock",
    "DelegationTicketLock",
]

# status codes returned by lock_or_delegate
ACQUIRED = 0
DELEGATED = 1

_YIELD_ROUNDS = 2
# real sleeps on Linux cost ~50-100us regardless of the requested value;
# these are floors, not precise delays
_WAIT_QUANTUM = 20e-6
_WAIT_CAP = 1e-3


def _next_pow2(n: int) -> int:
    return 1 << max(1, (n - 1).bit_length())


class PartitionedTicketLock:
    """FIFO spin lock where each waiter polls a private slot."""

    __slots__ = ("size", "_mask", "_head", "_tail", "_waitq")

    def __init__(self, capacity: int) -> None:
        """``capacity``: max threads that may contend at once.

        The slot array is sized to the next power of two, so slot
        indexing is a mask.  With at most ``size`` concurrent threads no
        slot is overwritten while still being awaited.
        """
        size = _next_pow2(max(2, capacity))
        self.size = size
        self._mask = size - 1
        self._head = AtomicInt(0)
        self._tail = 1
        # waitq[t % size] >= t means ticket t may proceed; slot values
        # only grow (by size per lap), and waitq[0] == 0 lets the first
        # ticket in immediately
        self._waitq = [0] * size

    def lock(self) -> int:
        """Acquire, return the ticket identifying this acquisition."""
        t = self._head.fetch_add(1)
        self._await_turn(t)
        return t

    def try_lock(self) -> int | None:
        """Acquire only if free right now; return a ticket or None.

        Free test then a compare-exchange on head.  A successful swap
        means no ticket was handed out since the free observation, and
        tail cannot have moved either (every release is paired with a
        prior ticket), so the caller owns the lock without waiting.  A
        failed attempt leaves no trace in the wait slots.
        """
        h = self._head.load()
        if self._tail != h + 1:
            return None
        if self._head.compare_exchange(h, h + 1):
            return h
        return None

    def unlock(self) -> None:
        """Release: advance tail, then publish the new front ticket.

        Tail must move first.  A waiter woken by the slot write may
        immediately act as owner and read tail; it has to see the
        advanced value.
        """
        nt = self._tail + 1
        self._tail = nt
        self._waitq[(nt - 1) & self._mask] = nt - 1

    def is_free(self) -> bool:
        """True iff nobody holds the lock and nobody is queued."""
        return self._tail == self._head.load() + 1

    def _await_turn(self, t: int) -> None:
        waitq = self._waitq
        slot = t & self._mask
        if waitq[slot] >= t:
            return
        for _ in range(_YIELD_ROUNDS):
            time.sleep(0)
            if waitq[slot] >= t:
                return
        quantum = _WAIT_QUANTUM
        cap = _WAIT_CAP
        while True:
            dist = t - self._tail + 1
            delay = quantum * dist if dist > 1 else quantum
            time.sleep(delay if delay < cap else cap)
            if waitq[slot] >= t:
                return


class DelegationTicketLock(PartitionedTicketLock):
    """Ticket lock whose owner can answer queued callers in FIFO order.

    Callers are identified by a small integer id in [0, size).  A
    registered waiter's logq slot holds ticket + id in a single value;
    the owner recovers the front waiter's id as logq[tail % size] - tail
    because the front waiter's ticket equals tail by construction.
    """

    __slots__ = ("_logq", "_ready_ticket", "_ready_item")

    def __init__(self, capacity: int) -> None:
        super().__init__(capacity)
        self._logq = [0] * self.size
        # readyq ticket -1 means "never served": 0 is a real ticket, and
        # the first caller on a fresh lock acquires without waiting, so
        # a zero init would false-match its readyq probe
        self._ready_ticket = [-1] * self.size
        self._ready_item: list[Any] = [None] * self.size

    def lock_or_delegate(self, caller_id: int) -> tuple[int, Any]:
        """Acquire the lock, or have the owner complete our request.

        Returns (ACQUIRED, ticket) when the caller owns the lock, or
        (DELEGATED, item) when the owner served this caller and released
        it without handing over ownership.
        """
        assert 0 <= caller_id < self.size
        t = self._head.fetch_add(1)
        # register before waiting so the owner can see us
        self._logq[t & self._mask] = t + caller_id
        self._await_turn(t)
        if self._ready_ticket[caller_id] == t:
            item = self._ready_item[caller_id]
            self._ready_item[caller_id] = None
            return (DELEGATED, item)
        return (ACQUIRED, t)

    def empty(self) -> bool:
        """Owner only: true iff no waiter is registered at the front.

        A slot left over from an earlier lap holds a ticket at least
        size turns old, so comparing against tail filters stale entries.
        Racy against an in-flight registration by design; a missed
        waiter simply acquires the lock itself later.
        """
        tail = self._tail
        return self._logq[tail & self._mask] < tail

    def front(self) -> int:
        """Owner only: id of the longest-waiting registered caller."""
        assert not self.empty()
        tail = self._tail
        return self._logq[tail & self._mask] - tail

    def set_item(self, caller_id: int, item: Any) -> None:
        """Owner only: stage the result for the front waiter.

        The item is written before the ticket; the ticket write is what
        the waiter's readyq probe matches on, so it must come last.
        Staging alone wakes nobody; pop_front does.
        """
        self._ready_item[caller_id] = item
        self._ready_ticket[caller_id] = self._tail

    def pop_front(self) -> None:
        """Owner only: wake the front waiter via the release protocol.

        After a set_item the woken waiter takes the delegated path and
        ownership stays with the caller; without one it finds no staged
        ticket and becomes the new owner.
        """
        self.unlock()
