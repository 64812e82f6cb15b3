"""Correctness oracles for dependency-ordered execution.

Independent of the engine: given the declared task tree and the measured
execution intervals, recompute from first principles which orderings a
correct run must exhibit, and report every breach.

Ordering rules per domain and address, over tasks in registration order:

  * a writer (WRITE or READWRITE) may not start until every earlier
    access to that address has fully finished;
  * a reader may not start until the last earlier writer has fully
    finished (readers between two writers are mutually unordered);
  * "fully finished" means the owning task's recorded end, which by the
    nested-wait rule already covers everything it spawned;
  * a nested task cannot start before its parent starts, and its parent
    cannot end before it ends;
  * a nested chain on an address the parent also declares cannot start
    before the parent's own start bound for that address.

Timestamps must come from one monotonic clock; an end is recorded
strictly before the dependent start it releases, so the comparisons use
plain >=.

Also provides the random nested task-tree generator used by stress and
acceptance tests.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Dict, List, Tuple

from .deps import AccessType, _merge_decls

__all__ = ["TaskSpec", "random_task_tree", "count_tasks", "check_intervals"]


@dataclass
class TaskSpec:
    label: str
    decls: List[Tuple[int, AccessType]]
    children: List["TaskSpec"] = field(default_factory=list)
    work: int = 0  # busy-work units for the task body


def count_tasks(specs: List[TaskSpec]) -> int:
    return sum(1 + count_tasks(s.children) for s in specs)


def random_task_tree(
    rng: random.Random,
    max_tasks: int = 200,
    n_addresses: int = 8,
    max_depth: int = 3,
    max_work: int = 50,
) -> List[TaskSpec]:
    """Random nested task forest with valid access declarations.

    A nested task may reuse a parent address only without escalating the
    access: reading under a read-only parent access is fine, writing is
    not.  Addresses absent from the parent may be used freely (they form
    independent chains in the nested domain).
    """
    target = rng.randint(max(2, max_tasks // 4), max_tasks)
    total = 0
    types = [AccessType.READ, AccessType.WRITE, AccessType.READWRITE]

    def build(depth: int, label: str, parent_merged: dict) -> TaskSpec:
        nonlocal total
        total += 1
        decls = []
        for _ in range(rng.randint(1, 3)):
            addr = rng.randrange(n_addresses)
            if addr in parent_merged and parent_merged[addr] == AccessType.READ:
                ty = AccessType.READ
            else:
                ty = rng.choice(types)
            decls.append((addr, ty))
        spec = TaskSpec(label=label, decls=decls, work=rng.randint(0, max_work))
        if depth < max_depth:
            merged = _merge_decls(decls)
            n_kids = rng.choice((0, 0, 0, 0, 1, 1, 2, 3))
            for k in range(n_kids):
                if total >= target:
                    break
                spec.children.append(build(depth + 1, f"{label}.{k}", merged))
        return spec

    top: List[TaskSpec] = []
    while total < target:
        top.append(build(1, str(len(top)), {}))
    return top


def _is_writer(ty: AccessType) -> bool:
    return ty != AccessType.READ


def check_intervals(
    specs: List[TaskSpec], intervals: Dict[str, Tuple[int, int]]
) -> List[str]:
    """Return all ordering violations ([] means the run was sound)."""
    violations: List[str] = []

    def domain(members: List[TaskSpec], gates: Dict[int, int], parent: TaskSpec | None):
        # per-address bounds accumulated along the chain
        last_write_end: Dict[int, int] = {}
        any_end: Dict[int, int] = {}
        for spec in members:
            start, end = intervals[spec.label]
            if end < start:
                violations.append(f"{spec.label}: end before start")
            if parent is not None:
                p_start, p_end = intervals[parent.label]
                if start < p_start:
                    violations.append(
                        f"{spec.label}: started before its parent {parent.label}"
                    )
                if end > p_end:
                    violations.append(
                        f"{spec.label}: outlived its parent {parent.label}"
                    )
            merged = _merge_decls(spec.decls)
            bounds: Dict[int, int] = {}
            for addr, ty in merged.items():
                gate = gates.get(addr, 0)
                if _is_writer(ty):
                    bound = any_end.get(addr, gate)
                else:
                    bound = last_write_end.get(addr, gate)
                bounds[addr] = bound
                if start < bound:
                    violations.append(
                        f"{spec.label}: {ty.name} of addr {addr} started at "
                        f"{start} before its release at {bound}"
                    )
            if spec.children:
                child_gates = {a: max(b, start) for a, b in bounds.items()}
                domain(spec.children, child_gates, spec)
            for addr, ty in merged.items():
                any_end[addr] = max(any_end.get(addr, 0), end)
                if _is_writer(ty):
                    last_write_end[addr] = max(last_write_end.get(addr, 0), end)

    domain(specs, {}, None)
    return violations
