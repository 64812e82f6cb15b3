"""Ready-task scheduler with a buffered add side and a delegating consume side.

Producers never touch the central lock on the happy path: each worker
pushes into one of a few bounded single-producer queues, guarded by a
per-queue ticket lock.  Consumers funnel through one delegation ticket
lock; the current owner drains the buffers into an unsynchronized
policy container, hands tasks directly to queued consumers, then takes
one for itself.  Most consumers therefore receive work without ever
owning the lock.

Two ablation variants exist for comparison runs: "ptlock" keeps the
fair ticket lock but drops buffering and delegation, and "mutex" is a
plain global lock around the policy.  All three expose the same three
methods, so the runtime treats them uniformly.
"""

from __future__ import annotations

import glob
import threading
import time
from collections import deque
from typing import Any, Optional

from .locks import DELEGATED, DelegationTicketLock, PartitionedTicketLock
from .spsc import SpscQueue

__all__ = [
    "FifoPolicy",
    "LifoPolicy",
    "SyncScheduler",
    "PTLockScheduler",
    "MutexScheduler",
    "make_scheduler",
    "numa_domain_count",
]

_FULL_RETRY_SLEEP = 20e-6


class FifoPolicy:
    __slots__ = ("_q",)

    def __init__(self) -> None:
        self._q: deque = deque()

    def push(self, task: Any) -> None:
        self._q.append(task)

    def pop(self) -> Optional[Any]:
        return self._q.popleft() if self._q else None

    def __len__(self) -> int:
        return len(self._q)


class LifoPolicy:
    __slots__ = ("_q",)

    def __init__(self) -> None:
        self._q: list = []

    def push(self, task: Any) -> None:
        self._q.append(task)

    def pop(self) -> Optional[Any]:
        return self._q.pop() if self._q else None

    def __len__(self) -> int:
        return len(self._q)


def numa_domain_count() -> int:
    nodes = glob.glob("/sys/devices/system/node/node[0-9]*")
    return len(nodes)


class SyncScheduler:
    """Delegation-based scheduler (the optimized variant)."""

    def __init__(self, workers: int, nq: int = 0, capacity: int = 512,
                 policy: Any = None, tracer: Any = None, redrain: bool = False):
        if nq <= 0:
            nq = numa_domain_count() or max(1, workers // 16)
        nq = max(1, min(nq, workers))
        self.nq = nq
        # +1 everywhere: the non-worker thread that seeds the root task
        # also contends on the producer side
        self._dtlock = DelegationTicketLock(workers + 1)
        self._add_queues = [SpscQueue(capacity) for _ in range(nq)]
        self._add_locks = [PartitionedTicketLock(workers + 1) for _ in range(nq)]
        self._policy = policy if policy is not None else FifoPolicy()
        self._tracer = tracer
        self._redrain = redrain
        self._owner_thread: Optional[int] = None

    # -- owner-only helpers -------------------------------------------

    def _enter_owner(self) -> None:
        assert self._owner_thread is None
        self._owner_thread = threading.get_ident()

    def _exit_owner(self) -> None:
        assert self._owner_thread == threading.get_ident()
        self._owner_thread = None

    def _policy_push(self, task: Any) -> None:
        assert self._owner_thread == threading.get_ident(), "policy touched by non-owner"
        self._policy.push(task)

    def _policy_pop(self) -> Optional[Any]:
        assert self._owner_thread == threading.get_ident(), "policy touched by non-owner"
        return self._policy.pop()

    # -- public api ----------------------------------------------------

    def add_ready_task(self, task: Any, origin: int = 0) -> None:
        """Buffer a ready task; never drops, never serves other workers."""
        q = origin % self.nq
        lock = self._add_locks[q]
        buf = self._add_queues[q]
        while True:
            lock.lock()
            pushed = buf.push(task)
            lock.unlock()
            if pushed:
                return
            # buffer full: drain it ourselves if the big lock is free,
            # otherwise wait for a consumer to make room
            if self._dtlock.try_lock() is not None:
                self._enter_owner()
                self.process_ready_tasks()
                self._policy_push(task)
                self._exit_owner()
                self._dtlock.unlock()
                return
            time.sleep(_FULL_RETRY_SLEEP)

    def get_ready_task(self, worker_id: int) -> Optional[Any]:
        """One task, or None if the system is idle right now."""
        tracer = self._tracer
        if tracer is not None:
            tracer.emit(worker_id, "sched_enter", 0)
        status, value = self._dtlock.lock_or_delegate(worker_id)
        if status == DELEGATED:
            if tracer is not None:
                tracer.emit(worker_id, "sched_leave", 1 if value is not None else 0)
            return value
        self._enter_owner()
        self.process_ready_tasks()
        served = 0
        while not self._dtlock.empty():
            if self._redrain and served:
                self.process_ready_tasks()
            task = self._policy_pop()
            if task is None:
                break
            self._dtlock.set_item(self._dtlock.front(), task)
            self._dtlock.pop_front()
            served += 1
        own = self._policy_pop()
        self._exit_owner()
        self._dtlock.unlock()
        if tracer is not None:
            if served:
                tracer.emit(worker_id, "sched_serve", served)
            tracer.emit(worker_id, "sched_leave", 1 if own is not None else 0)
        return own

    def process_ready_tasks(self) -> int:
        """Owner only: move everything buffered into the policy."""
        moved = 0
        for buf in self._add_queues:
            while (task := buf.pop()) is not None:
                self._policy_push(task)
                moved += 1
        return moved


class PTLockScheduler:
    """Ablation: fair ticket lock around the policy, no buffering."""

    def __init__(self, workers: int, policy: Any = None, tracer: Any = None, **_: Any):
        self._lock = PartitionedTicketLock(workers + 2)
        self._policy = policy if policy is not None else FifoPolicy()
        self._tracer = tracer

    def add_ready_task(self, task: Any, origin: int = 0) -> None:
        self._lock.lock()
        self._policy.push(task)
        self._lock.unlock()

    def get_ready_task(self, worker_id: int) -> Optional[Any]:
        tracer = self._tracer
        if tracer is not None:
            tracer.emit(worker_id, "sched_enter", 0)
        self._lock.lock()
        task = self._policy.pop()
        self._lock.unlock()
        if tracer is not None:
            tracer.emit(worker_id, "sched_leave", 1 if task is not None else 0)
        return task

    def process_ready_tasks(self) -> int:
        return 0


class MutexScheduler:
    """Ablation: one global mutex around the policy."""

    def __init__(self, workers: int, policy: Any = None, tracer: Any = None, **_: Any):
        self._lock = threading.Lock()
        self._policy = policy if policy is not None else FifoPolicy()
        self._tracer = tracer

    def add_ready_task(self, task: Any, origin: int = 0) -> None:
        with self._lock:
            self._policy.push(task)

    def get_ready_task(self, worker_id: int) -> Optional[Any]:
        tracer = self._tracer
        if tracer is not None:
            tracer.emit(worker_id, "sched_enter", 0)
        with self._lock:
            task = self._policy.pop()
        if tracer is not None:
            tracer.emit(worker_id, "sched_leave", 1 if task is not None else 0)
        return task

    def process_ready_tasks(self) -> int:
        return 0


_SYNC_VARIANTS = {
    "dtlock": SyncScheduler,
    "ptlock": PTLockScheduler,
    "mutex": MutexScheduler,
}

_POLICIES = {"fifo": FifoPolicy, "lifo": LifoPolicy}


def make_scheduler(workers: int, sync: str = "dtlock", policy: str = "fifo",
                   nq: int = 0, capacity: int = 512, tracer: Any = None,
                   redrain: bool = False):
    try:
        cls = _SYNC_VARIANTS[sync]
    except KeyError:
        raise ValueError(f"unknown scheduler.sync {sync!r}") from None
    try:
        pol = _POLICIES[policy]()
    except KeyError:
        raise ValueError(f"unknown scheduler.policy {policy!r}") from None
    return cls(workers, nq=nq, capacity=capacity, policy=pol, tracer=tracer,
               redrain=redrain)
