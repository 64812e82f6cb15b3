from __future__ import annotations

import random

import pytest

from taskforge.deps import (
    AccessType,
    DependencyDomain,
    MailBox,
    _merge_decls,
    register_task_accesses,
    unregister_task_accesses,
)
from taskforge.verify import TaskSpec, check_intervals, count_tasks, random_task_tree

R, W, RW = AccessType.READ, AccessType.WRITE, AccessType.READWRITE


# ----------------------------------------------------- oracle, handmade


def flat(decls_list):
    return [TaskSpec(label=str(i), decls=d) for i, d in enumerate(decls_list)]


def test_sound_write_read_read_write():
    specs = flat([[("x", W)], [("x", R)], [("x", R)], [("x", W)]])
    iv = {"0": (0, 10), "1": (10, 20), "2": (12, 18), "3": (20, 30)}
    assert check_intervals(specs, iv) == []


def test_reader_overlap_is_allowed():
    specs = flat([[("x", W)], [("x", R)], [("x", R)]])
    iv = {"0": (0, 10), "1": (10, 30), "2": (11, 15)}
    assert check_intervals(specs, iv) == []


def test_writer_overtaking_reader_is_flagged():
    specs = flat([[("x", W)], [("x", R)], [("x", W)]])
    iv = {"0": (0, 10), "1": (10, 20), "2": (19, 25)}
    out = check_intervals(specs, iv)
    assert len(out) == 1 and out[0].startswith("2:")


def test_reader_before_writer_end_is_flagged():
    specs = flat([[("x", W)], [("x", R)]])
    iv = {"0": (0, 10), "1": (9, 20)}
    assert len(check_intervals(specs, iv)) == 1


def test_readwrite_orders_against_readers():
    specs = flat([[("x", R)], [("x", RW)]])
    iv = {"0": (0, 10), "1": (5, 15)}
    assert len(check_intervals(specs, iv)) == 1
    iv = {"0": (0, 10), "1": (10, 15)}
    assert check_intervals(specs, iv) == []


def test_unrelated_addresses_unordered():
    specs = flat([[("x", W)], [("y", W)]])
    iv = {"0": (0, 10), "1": (0, 10)}
    assert check_intervals(specs, iv) == []


def test_nested_containment_checks():
    parent = TaskSpec(label="p", decls=[("x", W)])
    parent.children = [TaskSpec(label="p.0", decls=[("x", R)])]
    iv = {"p": (0, 50), "p.0": (5, 10)}
    assert check_intervals([parent], iv) == []
    iv = {"p": (0, 50), "p.0": (5, 60)}
    assert any("outlived" in v for v in check_intervals([parent], iv))
    iv = {"p": (10, 50), "p.0": (5, 20)}
    assert any("before its parent" in v for v in check_intervals([parent], iv))


def test_nested_chain_ordering_inside_child_domain():
    parent = TaskSpec(label="p", decls=[("x", W)])
    parent.children = [
        TaskSpec(label="p.0", decls=[("x", W)]),
        TaskSpec(label="p.1", decls=[("x", W)]),
    ]
    iv = {"p": (0, 100), "p.0": (10, 20), "p.1": (20, 30)}
    assert check_intervals([parent], iv) == []
    iv = {"p": (0, 100), "p.0": (10, 20), "p.1": (15, 30)}
    assert len(check_intervals([parent], iv)) == 1


def test_sibling_domains_do_not_interact():
    # same address in two different nested domains: no cross edges
    a = TaskSpec(label="a", decls=[("x", W)])
    a.children = [TaskSpec(label="a.0", decls=[("z", W)])]
    b = TaskSpec(label="b", decls=[("y", W)])
    b.children = [TaskSpec(label="b.0", decls=[("z", W)])]
    iv = {"a": (0, 20), "a.0": (5, 15), "b": (0, 20), "b.0": (6, 14)}
    assert check_intervals([a, b], iv) == []


# ------------------------------------------------------------ generator


def test_generator_respects_budget_and_depth():
    rng = random.Random(7)
    for _ in range(20):
        specs = random_task_tree(rng, max_tasks=40, n_addresses=4, max_depth=3)
        assert 1 <= count_tasks(specs) <= 40

        def depth(s, d=1):
            return max([d] + [depth(c, d + 1) for c in s.children])

        assert all(depth(s) <= 3 for s in specs)


def test_generator_never_escalates_under_read_parent():
    rng = random.Random(11)

    def walk(spec):
        merged = _merge_decls(spec.decls)
        for child in spec.children:
            for addr, ty in child.decls:
                if addr in merged and merged[addr] == R:
                    assert ty == R
            walk(child)

    for _ in range(30):
        for spec in random_task_tree(rng, max_tasks=30, n_addresses=3):
            walk(spec)


def test_generator_labels_unique():
    rng = random.Random(3)
    specs = random_task_tree(rng, max_tasks=100)
    seen = set()

    def walk(s):
        assert s.label not in seen
        seen.add(s.label)
        for c in s.children:
            walk(c)

    for s in specs:
        walk(s)


# ------------------------- engine vs oracle, virtual random scheduling


class _VTask:
    def __init__(self, spec):
        self.spec = spec
        self.accesses = []
        self.readiness = None
        self.child_domain = None
        self.unregistered = False
        self.ready = False

    def on_ready(self):
        self.ready = True


def _virtual_run(specs, rng):
    """Drive the real engine with a random valid schedule, no threads.

    Returns measured virtual intervals for the oracle.  Any lost wakeup
    or premature readiness shows up as a stall or an oracle violation.
    """
    mb = MailBox()
    root = DependencyDomain()
    clock = 0
    intervals = {}
    running = []  # started, children possibly outstanding
    pending = []  # ready but not started

    def register(spec, domain):
        t = _VTask(spec)
        register_task_accesses(t, spec.decls, domain, mb)
        pending.append(t)
        return t

    for spec in specs:
        register(spec, root)

    done = 0
    total = count_tasks(specs)
    while done < total:
        runnable = [t for t in pending if t.ready]
        # a running task may end once all its children are finished
        endable = [t for t in running if all(c.unregistered for c in t.kids)]
        actions = [("start", t) for t in runnable] + [("end", t) for t in endable]
        assert actions, "engine stalled: nothing runnable but work remains"
        kind, t = rng.choice(actions)
        if kind == "start":
            pending.remove(t)
            nonloc_start = clock = clock + 1
            t.start = nonloc_start
            t.kids = []
            if t.spec.children:
                t.child_domain = DependencyDomain(owner=t)
                for cs in t.spec.children:
                    t.kids.append(register(cs, t.child_domain))
            running.append(t)
        else:
            running.remove(t)
            clock += 1
            intervals[t.spec.label] = (t.start, clock)
            unregister_task_accesses(t, mb)
            done += 1
    assert len(mb) == 0
    return intervals


@pytest.mark.parametrize("seed", range(10))
def test_engine_schedules_pass_oracle(seed):
    rng = random.Random(seed)
    specs = random_task_tree(rng, max_tasks=60, n_addresses=4, max_depth=3)
    intervals = _virtual_run(specs, rng)
    assert check_intervals(specs, intervals) == []
