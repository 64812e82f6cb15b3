"""Flag-driven dependency engine.

Each data access owned by a task carries a monotone bit-set of state
flags mutated only through atomic fetch-or.  Dependency progress is a
stream of small messages, each delivering a set of flags to one access;
reactions are computed from which conjunctions of flags the delivery
newly completed.  Because flags only ever turn on, every conjunction is
completed by exactly one delivery, so every reaction fires exactly once
without any per-access locking.

Messages carry only flags absent from the target (checked on every
delivery).  With ten flags this caps deliveries per access at ten, so
draining a mailbox is bounded work.

Relations between accesses:

  * successor: the next access to the same address registered in the
    same domain (program order).  Satisfaction flows along successors.
  * child: the first access to the same address registered inside the
    owning task's nested domain.  Satisfaction flows down to it, and
    completion of the whole child chain flows back up.
  * parent: back link used by the final access of a child chain to
    report chain completion; carried forward through the chain so the
    tail always has it.

Readiness: a task's readiness counter starts at (number of accesses)+1.
Each access decrements it when first satisfied; the registration code
drops the final guard unit.  The zero crossing happens exactly once and
triggers the owner's ready callback.

The owning-task objects just need the attributes used here: readiness
(AtomicInt), accesses (list), child_domain, unregistered, and an
on_ready() callback.  The runtime's Task provides them; unit tests stub
them.
"""

from __future__ import annotations

from collections import deque
from enum import IntEnum
from typing import Any, Iterable, Optional

from .atomics import AtomicInt

__all__ = [
    "AccessType",
    "READ_SAT",
    "WRITE_SAT",
    "COMPLETED",
    "CHILD_COMPLETED",
    "SUCCESSOR_LINKED",
    "CHILD_LINKED",
    "PARENT_SEALED",
    "ACK_SUCCESSOR",
    "ACK_CHILD",
    "ACK_PARENT",
    "ALL_FLAGS",
    "flag_names",
    "DataAccess",
    "DataAccessMessage",
    "MailBox",
    "DependencyDomain",
    "DependencyProtocolError",
    "register_task_accesses",
    "deliver",
    "process_mailbox",
    "unregister_task_accesses",
    "is_terminal",
    "is_satisfied",
]


class AccessType(IntEnum):
    READ = 0
    WRITE = 1
    READWRITE = 2


READ_SAT = 1 << 0         # every earlier conflicting write finished
WRITE_SAT = 1 << 1        # every earlier access finished
COMPLETED = 1 << 2        # owning task's body finished
CHILD_COMPLETED = 1 << 3  # nested chain (if any) fully finished
SUCCESSOR_LINKED = 1 << 4
CHILD_LINKED = 1 << 5
PARENT_SEALED = 1 << 6    # owner finished; no more child registrations
ACK_SUCCESSOR = 1 << 7
ACK_CHILD = 1 << 8
ACK_PARENT = 1 << 9

ALL_FLAGS = (1 << 10) - 1

_NAMES = [
    "READ_SAT",
    "WRITE_SAT",
    "COMPLETED",
    "CHILD_COMPLETED",
    "SUCCESSOR_LINKED",
    "CHILD_LINKED",
    "PARENT_SEALED",
    "ACK_SUCCESSOR",
    "ACK_CHILD",
    "ACK_PARENT",
]

# an access is fully resolved once these all hold
_DONE = READ_SAT | WRITE_SAT | COMPLETED | CHILD_COMPLETED
_R2_TRIGGER = WRITE_SAT | COMPLETED | CHILD_COMPLETED | SUCCESSOR_LINKED
_R4_TRIGGER = WRITE_SAT | COMPLETED | CHILD_COMPLETED | PARENT_SEALED


def flag_names(bits: int) -> str:
    if not bits:
        return "{}"
    return "{" + ",".join(n for i, n in enumerate(_NAMES) if bits & (1 << i)) + "}"


class DependencyProtocolError(AssertionError):
    pass


class DataAccess:
    __slots__ = (
        "address",
        "atype",
        "flags",
        "successor",
        "child",
        "parent",
        "owner",
        "_sent_to_successor",
        "r4_sent",
        "delivery_count",
    )

    def __init__(self, address: Any, atype: AccessType, owner: Any, auditing: bool = False):
        self.address = address
        self.atype = atype
        self.flags = AtomicInt(0)
        self.successor: Optional[DataAccess] = None
        self.child: Optional[DataAccess] = None
        self.parent: Optional[DataAccess] = None
        self.owner = owner
        # claim word for satisfaction bits already emitted toward the
        # successor; the two emitting reactions can fire concurrently on
        # different workers, so claims must be atomic
        self._sent_to_successor = AtomicInt(0)
        self.r4_sent = False
        self.delivery_count = AtomicInt(0) if auditing else None

    def __repr__(self) -> str:  # pragma: no cover
        return (
            f"DataAccess(addr={self.address!r}, {self.atype.name}, "
            f"flags={flag_names(self.flags.load())})"
        )


class DataAccessMessage:
    __slots__ = ("flags_for_next", "flags_after_propagation", "src", "dst")

    def __init__(
        self,
        flags_for_next: int,
        dst: DataAccess,
        src: Optional[DataAccess] = None,
        flags_after_propagation: int = 0,
    ):
        self.flags_for_next = flags_for_next
        self.flags_after_propagation = flags_after_propagation
        self.src = src
        self.dst = dst

    def __repr__(self) -> str:  # pragma: no cover
        ack = (
            f", ack={flag_names(self.flags_after_propagation)}"
            if self.flags_after_propagation
            else ""
        )
        return f"Msg({flag_names(self.flags_for_next)} -> {self.dst!r}{ack})"


class MailBox:
    """Per-worker FIFO of pending dependency messages. Never shared."""

    __slots__ = ("_q",)

    def __init__(self) -> None:
        self._q: deque = deque()

    def push(self, msg: DataAccessMessage) -> None:
        self._q.append(msg)

    def pop(self) -> Optional[DataAccessMessage]:
        return self._q.popleft() if self._q else None

    def __len__(self) -> int:
        return len(self._q)


class DependencyDomain:
    """One nesting level of dependency chains.

    bottom_map tracks the most recent access per address; it is only
    touched by the thread running the owning task, so it needs no lock.
    A domain owned by a task resolves child-chain roots against the
    owner's own accesses.
    """

    __slots__ = ("bottom_map", "owner", "sealed", "auditing", "tasks", "_parent_map")

    def __init__(self, owner: Any = None, auditing: bool = False):
        self.bottom_map: dict = {}
        self.owner = owner
        self.sealed = False
        self.auditing = auditing
        self.tasks: list = []  # registered tasks, kept until domain teardown
        self._parent_map: dict = (
            {a.address: a for a in owner.accesses} if owner is not None else {}
        )

    def parent_access(self, address: Any) -> Optional[DataAccess]:
        return self._parent_map.get(address)


def is_satisfied(flags: int, atype: AccessType) -> bool:
    """May the owning task run, as far as this access is concerned."""
    if atype == AccessType.READ and flags & READ_SAT:
        return True
    return bool(flags & WRITE_SAT)


def _merge_decls(decls: Iterable[tuple]) -> dict:
    """Collapse duplicate addresses; mixed access types conflict as both."""
    merged: dict = {}
    for address, atype in decls:
        atype = AccessType(atype)
        prev = merged.get(address)
        if prev is None:
            merged[address] = atype
        elif prev != atype:
            merged[address] = AccessType.READWRITE
    return merged


def register_task_accesses(task: Any, decls: Iterable[tuple], domain: DependencyDomain,
                           mailbox: MailBox) -> int:
    """Create and link one access per declared (address, type).

    Must run on the thread executing the task's creator while the
    domain is open.  The readiness counter is seeded with an extra guard
    unit so satisfactions delivered mid-registration cannot make the
    task ready before its access list is complete.
    """
    if domain.sealed:
        raise DependencyProtocolError("registration into a sealed domain")
    merged = _merge_decls(decls)
    task.readiness = AtomicInt(len(merged) + 1)
    domain.tasks.append(task)
    for address, atype in merged.items():
        access = DataAccess(address, atype, task, auditing=domain.auditing)
        task.accesses.append(access)
        pred = domain.bottom_map.get(address)
        if pred is None:
            parent = domain.parent_access(address)
            if parent is not None:
                # root of a nested chain under a matching outer access
                access.parent = parent
                parent.child = access
                mailbox.push(DataAccessMessage(CHILD_LINKED, dst=parent, src=access))
            else:
                # no earlier access anywhere: born satisfied
                mailbox.push(DataAccessMessage(READ_SAT | WRITE_SAT, dst=access))
        else:
            pred.successor = access
            # carry the chain's parent pointer to the new tail
            access.parent = pred.parent
            mailbox.push(DataAccessMessage(SUCCESSOR_LINKED, dst=pred, src=access))
        domain.bottom_map[address] = access
    _readiness_step(task)
    return process_mailbox(mailbox)


def _readiness_step(task: Any) -> None:
    remaining = task.readiness.fetch_sub(1)
    if remaining == 1:
        task.on_ready()
    elif remaining < 1:
        raise DependencyProtocolError("readiness counter went negative")


def deliver(msg: DataAccessMessage) -> list:
    """Apply one message; return the reactions it provokes.

    The fetch-or linearizes concurrent deliveries, and each reaction is
    keyed to a flag conjunction first completed by exactly one of them,
    so no reaction can fire twice.
    """
    dst = msg.dst
    m = msg.flags_for_next
    before = dst.flags.fetch_or(m)
    after = before | m
    if m == 0:
        raise DependencyProtocolError("empty message delivered")
    if m & before:
        raise DependencyProtocolError(
            f"redundant flags {flag_names(m & before)} delivered to {dst!r}"
        )
    if dst.delivery_count is not None:
        dst.delivery_count.fetch_add(1)

    out: list = []

    def newly(bits: int) -> bool:
        return (after & bits) == bits and (before & bits) != bits

    if is_satisfied(after, dst.atype) and not is_satisfied(before, dst.atype):
        _readiness_step(dst.owner)

    # reader satisfaction races ahead along the chain
    if dst.atype == AccessType.READ and newly(READ_SAT | SUCCESSOR_LINKED):
        bits = READ_SAT & ~dst._sent_to_successor.fetch_or(READ_SAT)
        if bits:
            out.append(DataAccessMessage(bits, dst=dst.successor, src=dst))

    # full resolution hands both satisfaction bits to the successor
    if newly(_R2_TRIGGER):
        claim = READ_SAT | WRITE_SAT
        bits = claim & ~dst._sent_to_successor.fetch_or(claim)
        if bits:
            out.append(
                DataAccessMessage(
                    bits, dst=dst.successor, src=dst, flags_after_propagation=ACK_SUCCESSOR
                )
            )

    # satisfaction flows down into a nested chain as it arrives
    if newly(READ_SAT | CHILD_LINKED):
        out.append(DataAccessMessage(READ_SAT, dst=dst.child, src=dst))
    if newly(WRITE_SAT | CHILD_LINKED):
        out.append(
            DataAccessMessage(
                WRITE_SAT, dst=dst.child, src=dst, flags_after_propagation=ACK_CHILD
            )
        )

    # the final access of a resolved child chain reports back up
    if (
        dst.parent is not None
        and dst.successor is None
        and newly(_R4_TRIGGER)
    ):
        dst.r4_sent = True
        out.append(
            DataAccessMessage(
                CHILD_COMPLETED, dst=dst.parent, src=dst, flags_after_propagation=ACK_PARENT
            )
        )

    if msg.flags_after_propagation and msg.src is not None:
        out.append(DataAccessMessage(msg.flags_after_propagation, dst=msg.src, src=dst))
    return out


def process_mailbox(mailbox: MailBox) -> int:
    """Drain the worker's mailbox, including messages generated mid-drain.

    Returns the number of messages delivered.
    """
    delivered = 0
    while (msg := mailbox.pop()) is not None:
        delivered += 1
        for reaction in deliver(msg):
            mailbox.push(reaction)
    return delivered


def unregister_task_accesses(task: Any, mailbox: MailBox) -> int:
    """Send the completion wave for a finished task and drain.

    One message per access; accesses with a nested chain additionally
    seal that chain's tail so its completion can flow back up.
    """
    if task.unregistered:
        raise DependencyProtocolError("task unregistered twice")
    task.unregistered = True
    child_domain = task.child_domain
    for access in task.accesses:
        if access.flags.load() & CHILD_LINKED:
            mailbox.push(DataAccessMessage(COMPLETED, dst=access))
            tail = child_domain.bottom_map[access.address]
            mailbox.push(DataAccessMessage(PARENT_SEALED, dst=tail))
        else:
            mailbox.push(DataAccessMessage(COMPLETED | CHILD_COMPLETED, dst=access))
    if child_domain is not None:
        child_domain.sealed = True
    return process_mailbox(mailbox)


def is_terminal(access: DataAccess) -> bool:
    """True when nothing will ever be delivered to this access again."""
    flags = access.flags.load()
    if flags & _DONE != _DONE:
        return False
    if flags & SUCCESSOR_LINKED and not flags & ACK_SUCCESSOR:
        return False
    if flags & CHILD_LINKED and not flags & ACK_CHILD:
        return False
    if access.r4_sent and not flags & ACK_PARENT:
        return False
    return True
