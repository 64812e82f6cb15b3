"""Task runtime: worker threads, task lifecycle, structured waiting.

A run starts with one root task.  Tasks spawn children from inside
their bodies; each child declares the data it reads and writes, and the
dependency engine holds it back until every declared access is
satisfied.  A task implicitly waits for its children before it counts
as complete, so when the root finishes, everything has.

Blocked tasks never park their worker: taskwait and the implicit final
wait poll the scheduler and execute other ready tasks in the meantime,
so a handful of threads can chew through deeply nested graphs.

The calling thread is not a worker.  It seeds the root task, waits for
the run to finish, then audits that every task and access reached its
terminal state and every mailbox drained.
"""

from __future__ import annotations

import os
import sys
import threading
import time
from typing import Any, Callable, Iterable, Optional, Tuple

from .atomics import AtomicInt
from .config import RuntimeConfig, load_config
from .deps import (
    AccessType,
    DependencyDomain,
    MailBox,
    is_terminal,
    register_task_accesses,
    unregister_task_accesses,
)
from .scheduler import make_scheduler
from .tracing import Tracer

__all__ = [
    "Task",
    "Runtime",
    "RuntimeStateError",
    "TaskFailure",
    "run",
    "spawn",
    "taskwait",
    "current_task",
]

# task lifecycle states
CREATED = 0
READY = 1
RUNNING = 2
COMPLETED = 3
DISPOSED = 4

_STATE_NAMES = {CREATED: "created", READY: "ready", RUNNING: "running",
                COMPLETED: "completed", DISPOSED: "disposed"}

_IDLE_SLEEP_MIN = 1e-6
_IDLE_SLEEP_MAX = 50e-6
_SWITCH_INTERVAL = 0.0005

_MODE_NAMES = {
    "read": AccessType.READ,
    "write": AccessType.WRITE,
    "readwrite": AccessType.READWRITE,
}

# current task per thread, shared by all runtime instances; a thread
# executes at most one task at a time
_tls = threading.local()


class RuntimeStateError(RuntimeError):
    """A lifecycle rule was broken (nested run, spawn outside a task, ...)."""


class TaskFailure(RuntimeError):
    """A task body raised; carries the failing task's label."""

    def __init__(self, task: "Task", cause: BaseException):
        super().__init__(f"task {task.label!r} raised {cause!r}")
        self.task = task


class _Abort(BaseException):
    """Internal unwind signal; never escapes the worker loop."""


def _normalize_decls(deps: Iterable) -> list:
    out = []
    for entry in deps:
        address, mode = entry
        if isinstance(mode, str):
            try:
                mode = _MODE_NAMES[mode.lower()]
            except KeyError:
                raise ValueError(f"unknown access mode {mode!r}") from None
        out.append((address, AccessType(mode)))
    return out


class Task:
    __slots__ = (
        "body", "label", "tid", "parent", "accesses", "readiness",
        "child_count", "child_domain", "unregistered", "state", "_rt",
        "result",
    )

    def __init__(self, rt: "Runtime", body: Callable, label: str,
                 tid: int, parent: Optional["Task"]):
        self.body = body
        self.label = label
        self.tid = tid
        self.parent = parent
        self.accesses: list = []
        self.readiness: Optional[AtomicInt] = None
        self.child_count = AtomicInt(0)
        self.child_domain: Optional[DependencyDomain] = None
        self.unregistered = False
        self.state = CREATED
        self.result: Any = None
        self._rt = rt

    def _transition(self, expected: int, to: int) -> None:
        if self.state != expected:
            raise RuntimeStateError(
                f"task {self.label!r}: {_STATE_NAMES[self.state]} -> "
                f"{_STATE_NAMES[to]} (expected to be "
                f"{_STATE_NAMES[expected]})")
        self.state = to

    def on_ready(self) -> None:
        """Dependency engine callback: all declared accesses satisfied."""
        self._transition(CREATED, READY)
        rt = self._rt
        if rt._tracer is not None:
            rt._tracer.emit(rt._my_wid(), "task_ready", self.tid)
        rt._scheduler.add_ready_task(self, origin=rt._my_wid())

    def __repr__(self) -> str:  # pragma: no cover
        return f"<Task {self.label} {_STATE_NAMES[self.state]}>"


class Runtime:
    """One parallel execution: start() seeds the root, finish() reaps it.

    Instances are single-use; the module-level run() makes a fresh one
    per call, which is how consecutive runs work.
    """

    def __init__(self, cfg: Optional[RuntimeConfig] = None):
        self.cfg = cfg if cfg is not None else load_config()
        self.workers = self.cfg.effective_workers()
        self._rt_tls = threading.local()
        self._tracer: Optional[Tracer] = None
        if self.cfg.trace_enabled:
            # one buffer per worker plus one for the seeding thread
            self._tracer = Tracer(self.cfg.trace_dir, self.workers + 1)
        self._scheduler = make_scheduler(
            self.workers,
            sync=self.cfg.scheduler_sync,
            policy=self.cfg.scheduler_policy,
            nq=self.cfg.scheduler_nq,
            capacity=self.cfg.scheduler_capacity,
            tracer=self._tracer,
            redrain=self.cfg.scheduler_redrain,
        )
        self._root_domain = DependencyDomain(
            owner=None, auditing=self.cfg.dependency_auditing)
        self._threads: list = []
        self._stop = threading.Event()
        self._done = threading.Event()
        self._failure: Optional[Tuple[Task, BaseException]] = None
        self._failure_mu = threading.Lock()
        self._next_tid = AtomicInt(0)
        self._all_tasks: list = []
        self._mailboxes: list = []
        self._book_mu = threading.Lock()
        self._running = False
        self._finished = False

    # -- thread-local context -------------------------------------------

    def _my_wid(self) -> int:
        # the seeding thread uses the extra trailing slot
        return getattr(self._rt_tls, "wid", self.workers)

    def _mailbox(self) -> MailBox:
        mb = getattr(self._rt_tls, "mailbox", None)
        if mb is None:
            mb = self._rt_tls.mailbox = MailBox()
            with self._book_mu:
                self._mailboxes.append(mb)
        return mb

    # -- public api ------------------------------------------------------

    def run(self, body: Callable, deps: Iterable = ()) -> Any:
        """Execute body as the root task; return its result."""
        root = self.start(body, deps)
        self.finish()
        return root.result

    def start(self, body: Callable, deps: Iterable = ()) -> Task:
        if self._running:
            raise RuntimeStateError("runtime already running")
        if self._finished:
            raise RuntimeStateError(
                "runtime instances are single-use; make a new one")
        if getattr(_tls, "task", None) is not None:
            raise RuntimeStateError("run() called from inside a task")
        self._running = True
        self._old_switch = sys.getswitchinterval()
        sys.setswitchinterval(_SWITCH_INTERVAL)
        for wid in range(self.workers):
            t = threading.Thread(target=self._worker, args=(wid,),
                                 name=f"taskforge-w{wid}", daemon=True)
            self._threads.append(t)
            t.start()
        return self._make_task(body, deps, parent=None,
                               domain=self._root_domain, label="root")

    def finish(self) -> None:
        """Wait for the run seeded by start() to complete, then tear down."""
        if not self._running:
            raise RuntimeStateError("runtime is not running")
        try:
            while not self._done.wait(timeout=0.02):
                if self._failure is not None:
                    break
        finally:
            self._stop.set()
            for t in self._threads:
                t.join()
            self._threads.clear()
            sys.setswitchinterval(self._old_switch)
            self._running = False
            self._finished = True
            if self._tracer is not None:
                self._tracer.close()
        if self._failure is not None:
            task, cause = self._failure
            raise TaskFailure(task, cause) from cause
        self._audit()

    def spawn(self, body: Callable, deps: Iterable = (),
              label: Optional[str] = None) -> Task:
        parent = getattr(_tls, "task", None)
        if parent is None or parent._rt is not self:
            raise RuntimeStateError("spawn() outside a running task")
        domain = parent.child_domain
        if domain is None:
            domain = parent.child_domain = DependencyDomain(
                owner=parent, auditing=self.cfg.dependency_auditing)
        parent.child_count.fetch_add(1)
        return self._make_task(body, deps, parent=parent, domain=domain,
                               label=label)

    def taskwait(self) -> None:
        """Block the current task until its children so far are complete."""
        task = getattr(_tls, "task", None)
        if task is None or task._rt is not self:
            raise RuntimeStateError("taskwait() outside a running task")
        self._help_while(lambda: task.child_count.load() > 0)

    # -- internals ---------------------------------------------------------

    def _make_task(self, body: Callable, deps: Iterable, parent: Optional[Task],
                   domain: DependencyDomain, label: Optional[str] = None) -> Task:
        tid = self._next_tid.fetch_add(1)
        if label is None:
            label = f"task{tid}"
        task = Task(self, body, label, tid, parent)
        with self._book_mu:
            self._all_tasks.append(task)
        if self._tracer is not None:
            self._tracer.emit(self._my_wid(), "task_create", tid)
        delivered = register_task_accesses(
            task, _normalize_decls(deps), domain, self._mailbox())
        if self._tracer is not None and delivered:
            self._tracer.emit(self._my_wid(), "deps_deliver", delivered)
        return task

    def _worker(self, wid: int) -> None:
        self._rt_tls.wid = wid
        try:
            os.sched_setaffinity(0, {wid % (os.cpu_count() or 1)})
        except (AttributeError, OSError):
            pass
        pause = _IDLE_SLEEP_MIN
        sched = self._scheduler
        tracer = self._tracer
        while True:
            if self._failure is not None:
                return
            task = sched.get_ready_task(wid)
            if task is not None:
                try:
                    self._execute(task)
                except _Abort:
                    return
                if tracer is not None:
                    tracer.maybe_flush(wid)
                pause = _IDLE_SLEEP_MIN
                continue
            if self._stop.is_set():
                return
            time.sleep(pause)
            pause = min(pause * 2, _IDLE_SLEEP_MAX)

    def _execute(self, task: Task) -> None:
        task._transition(READY, RUNNING)
        outer = getattr(_tls, "task", None)
        _tls.task = task
        tracer = self._tracer
        wid = self._my_wid()
        if tracer is not None:
            tracer.emit(wid, "task_start", task.tid)
        try:
            try:
                task.result = task.body()
            except _Abort:
                raise
            except BaseException as exc:
                self._fail(task, exc)
                raise _Abort() from None
            # children first: a task is complete only once its subtree is
            self._help_while(lambda: task.child_count.load() > 0)
        finally:
            _tls.task = outer
        delivered = unregister_task_accesses(task, self._mailbox())
        if tracer is not None:
            if delivered:
                tracer.emit(wid, "deps_deliver", delivered)
            tracer.emit(wid, "task_end", task.tid)
        task._transition(RUNNING, COMPLETED)
        parent = task.parent
        if parent is not None:
            parent.child_count.fetch_sub(1)
        else:
            self._done.set()

    def _help_while(self, cond: Callable[[], bool]) -> None:
        """Poll cond, executing other ready tasks instead of blocking."""
        wid = self._my_wid()
        sched = self._scheduler
        pause = _IDLE_SLEEP_MIN
        while cond():
            if self._failure is not None:
                raise _Abort()
            other = sched.get_ready_task(wid)
            if other is not None:
                self._execute(other)
                pause = _IDLE_SLEEP_MIN
                continue
            time.sleep(pause)
            pause = min(pause * 2, _IDLE_SLEEP_MAX)

    def _fail(self, task: Task, exc: BaseException) -> None:
        with self._failure_mu:
            if self._failure is None:
                self._failure = (task, exc)

    def _audit(self) -> None:
        """After a clean run: nothing live, nothing pending, all terminal."""
        leaks = []
        with self._book_mu:
            tasks = list(self._all_tasks)
            mailboxes = list(self._mailboxes)
        for task in tasks:
            if task.state != COMPLETED:
                leaks.append(f"task {task.label!r} ended "
                             f"{_STATE_NAMES[task.state]}")
                continue
            for access in task.accesses:
                if not is_terminal(access):
                    leaks.append(f"task {task.label!r} access "
                                 f"{access.address!r} not terminal")
            task._transition(COMPLETED, DISPOSED)
        for mb in mailboxes:
            if len(mb):
                leaks.append(f"mailbox with {len(mb)} undelivered messages")
        if leaks:
            raise RuntimeStateError("unclean teardown: " + "; ".join(leaks))

    def live_task_count(self) -> int:
        """Tasks not yet reclaimed; zero after a clean finish()."""
        with self._book_mu:
            return sum(1 for t in self._all_tasks if t.state != DISPOSED)


# -- module-level conveniences ----------------------------------------------


def run(body: Callable, cfg: Optional[RuntimeConfig] = None,
        deps: Iterable = ()) -> Any:
    """Run body as the root task of a fresh runtime; return its result."""
    return Runtime(cfg).run(body, deps)


def current_task() -> Optional[Task]:
    """The task executing on this thread, if any."""
    return getattr(_tls, "task", None)


def spawn(body: Callable, deps: Iterable = (),
          label: Optional[str] = None) -> Task:
    """Create a child of the currently executing task."""
    task = current_task()
    if task is None:
        raise RuntimeStateError("spawn() outside a running task")
    return task._rt.spawn(body, deps, label=label)


def taskwait() -> None:
    """Wait until every child spawned so far by the current task is done."""
    task = current_task()
    if task is None:
        raise RuntimeStateError("taskwait() outside a running task")
    task._rt.taskwait()
