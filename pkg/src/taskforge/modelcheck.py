"""Exhaustive two-thread interleaving check of the ticket lock protocols.

The lock algorithms are restated here as tiny step machines in which
every step touches shared memory at most once (ticket fetch-and-add is
one step by construction).  An explicit-state explorer enumerates every
reachable interleaving of two threads, deduplicating states, and checks:

  * mutual exclusion: never two threads inside the critical section
  * progress: every reachable state can still reach a terminal state
  * terminal sanity: the lock ends free (tail == head + 1)
  * delegation exactness: staged items and delegated returns match
    one for one, and each receiver gets the item staged for its id

The machines are parameterized so known-wrong variants (publishing the
wake slot before advancing tail, or seeding ready tickets with 0, which
collides with real ticket 0) are demonstrably caught by the checker.
That keeps the checker honest and guards those orderings in the real
implementation against regressions by analogy.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

__all__ = ["check_ptlock", "check_dtlock", "ModelResult"]

_SIZE = 2  # two threads, two slots: wraparound happens immediately
_GIFT_BASE = 100


@dataclass(frozen=True)
class _St:
    head: int
    tail: int
    waitq: tuple
    logq: tuple
    rticket: tuple
    ritem: tuple
    pcs: tuple     # per-thread program counter label; "done" is terminal
    t: tuple       # per-thread ticket register
    wid: tuple     # per-thread scratch register (decoded front id)
    treg: tuple    # per-thread register holding a read of tail
    status: tuple  # per-thread outcome: "", "acq" or "del"
    item: tuple    # per-thread received item
    incs: tuple    # per-thread critical-section flag
    gifts: int     # number of staged items (model bookkeeping)


@dataclass
class ModelResult:
    states: int
    terminals: int
    violations: list

    @property
    def ok(self) -> bool:
        return not self.violations


def _set(tup: tuple, i: int, v) -> tuple:
    i %= len(tup)  # negative garbage indices behave like list indexing
    return tup[:i] + (v,) + tup[i + 1 :]


def _pt_init(n: int) -> _St:
    return _St(
        head=0,
        tail=1,
        waitq=(0,) * _SIZE,
        logq=(0,) * _SIZE,
        rticket=(-1,) * _SIZE,
        ritem=(None,) * _SIZE,
        pcs=("acq",) * n,
        t=(0,) * n,
        wid=(0,) * n,
        treg=(0,) * n,
        status=("",) * n,
        item=(None,) * n,
        incs=(0,) * n,
        gifts=0,
    )


def _unlock_steps(label: str, after: str, tail_first: bool):
    """Release decomposed to honest granularity: the tail increment is a
    read step and a write step, because the real code's plain increment
    is only sound while ownership guarantees a single writer.  The
    reversed (known-wrong) variant publishes the wake slot first; the
    woken thread then races the unfinished increment and the checker
    sees the lost update."""

    def read_tail(st: _St, tid: int, nxt: str) -> _St:
        return replace(st, treg=_set(st.treg, tid, st.tail), pcs=_set(st.pcs, tid, nxt))

    def write_tail(st: _St, tid: int, nxt: str) -> _St:
        return replace(st, tail=st.treg[tid] + 1, pcs=_set(st.pcs, tid, nxt))

    def publish(st: _St, tid: int, nxt: str) -> _St:
        val = st.treg[tid]  # the ticket after the releasing holder's
        return replace(
            st, waitq=_set(st.waitq, val % _SIZE, val), pcs=_set(st.pcs, tid, nxt)
        )

    a, b, c = label + "0", label + "1", label + "2"
    if tail_first:
        order = [read_tail, write_tail, publish]
    else:
        order = [read_tail, publish, write_tail]
    return {
        a: lambda st, tid: [order[0](st, tid, b)],
        b: lambda st, tid: [order[1](st, tid, c)],
        c: lambda st, tid: [order[2](st, tid, after)],
    }


def _pt_program(tail_first: bool) -> dict[str, Callable]:
    def acq(st: _St, tid: int):
        t = st.head
        return [replace(st, head=t + 1, t=_set(st.t, tid, t), pcs=_set(st.pcs, tid, "poll"))]

    def poll(st: _St, tid: int):
        t = st.t[tid]
        if st.waitq[t % _SIZE] >= t:
            return [replace(st, pcs=_set(st.pcs, tid, "enter"))]
        return [st]

    def enter(st: _St, tid: int):
        return [
            replace(
                st,
                incs=_set(st.incs, tid, 1),
                status=_set(st.status, tid, "acq"),
                pcs=_set(st.pcs, tid, "leave"),
            )
        ]

    def leave(st: _St, tid: int):
        return [replace(st, incs=_set(st.incs, tid, 0), pcs=_set(st.pcs, tid, "rel0"))]

    prog = {"acq": acq, "poll": poll, "enter": enter, "leave": leave}
    prog.update(_unlock_steps("rel", "done", tail_first))
    return prog


def _dt_program(tail_first: bool) -> dict[str, Callable]:
    """Each thread: lock_or_delegate(tid); owners serve every waiter."""

    def acq(st: _St, tid: int):
        t = st.head
        return [replace(st, head=t + 1, t=_set(st.t, tid, t), pcs=_set(st.pcs, tid, "reg"))]

    def reg(st: _St, tid: int):
        t = st.t[tid]
        return [
            replace(st, logq=_set(st.logq, t % _SIZE, t + tid), pcs=_set(st.pcs, tid, "poll"))
        ]

    def poll(st: _St, tid: int):
        t = st.t[tid]
        if st.waitq[t % _SIZE] >= t:
            return [replace(st, pcs=_set(st.pcs, tid, "probe"))]
        return [st]

    def probe(st: _St, tid: int):
        if st.rticket[tid] == st.t[tid]:
            return [replace(st, pcs=_set(st.pcs, tid, "take"))]
        return [
            replace(
                st,
                incs=_set(st.incs, tid, 1),
                status=_set(st.status, tid, "acq"),
                pcs=_set(st.pcs, tid, "empty"),
            )
        ]

    def take(st: _St, tid: int):
        return [
            replace(
                st,
                item=_set(st.item, tid, st.ritem[tid]),
                status=_set(st.status, tid, "del"),
                pcs=_set(st.pcs, tid, "done"),
            )
        ]

    def empty_rd(st: _St, tid: int):
        # split tail read from slot read: a registration may land in
        # between, which the protocol tolerates by design
        return [replace(st, treg=_set(st.treg, tid, st.tail), pcs=_set(st.pcs, tid, "emptyC"))]

    def empty_cmp(st: _St, tid: int):
        t = st.treg[tid]
        if st.logq[t % _SIZE] < t:
            return [replace(st, pcs=_set(st.pcs, tid, "exit"))]
        return [replace(st, pcs=_set(st.pcs, tid, "front"))]

    def front(st: _St, tid: int):
        # owner-only, tail stable while owning: combined read is sound
        wid = st.logq[st.tail % _SIZE] - st.tail
        return [replace(st, wid=_set(st.wid, tid, wid), pcs=_set(st.pcs, tid, "gift"))]

    def gift(st: _St, tid: int):
        wid = st.wid[tid]
        return [
            replace(st, ritem=_set(st.ritem, wid, _GIFT_BASE + wid), pcs=_set(st.pcs, tid, "pub"))
        ]

    def pub(st: _St, tid: int):
        wid = st.wid[tid]
        return [
            replace(
                st,
                rticket=_set(st.rticket, wid, st.tail),
                gifts=st.gifts + 1,
                pcs=_set(st.pcs, tid, "pop0"),
            )
        ]

    def exit_cs(st: _St, tid: int):
        return [replace(st, incs=_set(st.incs, tid, 0), pcs=_set(st.pcs, tid, "rel0"))]

    prog = {
        "acq": acq,
        "reg": reg,
        "poll": poll,
        "probe": probe,
        "take": take,
        "empty": empty_rd,
        "emptyC": empty_cmp,
        "front": front,
        "gift": gift,
        "pub": pub,
        "exit": exit_cs,
    }
    prog.update(_unlock_steps("pop", "empty", tail_first))
    prog.update(_unlock_steps("rel", "done", tail_first))
    return prog


def _explore(init: _St, prog: dict, n_threads: int, check_exactness: bool) -> ModelResult:
    seen = {init}
    stack = [init]
    preds: dict[_St, set] = {init: set()}
    terminals = set()
    violations: list = []

    def note(kind: str, st: _St) -> None:
        if len(violations) < 20:
            violations.append((kind, st))

    while stack:
        st = stack.pop()
        if sum(st.incs) > 1:
            note("mutual-exclusion", st)
        if all(pc == "done" for pc in st.pcs):
            terminals.add(st)
            if st.tail != st.head + 1:
                note("lock-not-free-at-end", st)
            if check_exactness:
                delegated = [i for i in range(n_threads) if st.status[i] == "del"]
                if st.gifts != len(delegated):
                    note("staged/delegated-mismatch", st)
                for i in delegated:
                    if st.item[i] != _GIFT_BASE + i:
                        note("wrong-delegated-item", st)
            continue
        for tid in range(n_threads):
            pc = st.pcs[tid]
            if pc == "done":
                continue
            for nxt in prog[pc](st, tid):
                if nxt is st or nxt == st:
                    continue  # self-loop poll; other threads drive progress
                preds.setdefault(nxt, set()).add(st)
                if nxt not in seen:
                    seen.add(nxt)
                    stack.append(nxt)

    # progress: walk predecessor edges back from the terminals; anything
    # unreached is a state from which completion is impossible
    reach = set(terminals)
    work = list(terminals)
    while work:
        cur = work.pop()
        for p in preds.get(cur, ()):
            if p not in reach:
                reach.add(p)
                work.append(p)
    stuck = seen - reach
    if stuck:
        note("stuck-states", next(iter(stuck)))
    if not terminals:
        note("no-terminal-state", init)
    return ModelResult(states=len(seen), terminals=len(terminals), violations=violations)


def check_ptlock(n_threads: int = 2, tail_first: bool = True) -> ModelResult:
    """Enumerate lock/unlock interleavings of the plain ticket lock."""
    return _explore(_pt_init(n_threads), _pt_program(tail_first), n_threads, False)


def check_dtlock(
    n_threads: int = 2, tail_first: bool = True, ready_init: int = -1
) -> ModelResult:
    """Enumerate interleavings of lock_or_delegate with serving owners."""
    init = _pt_init(n_threads)
    init = replace(init, rticket=(ready_init,) * _SIZE)
    return _explore(init, _dt_program(tail_first), n_threads, True)
