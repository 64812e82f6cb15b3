from __future__ import annotations

import threading
import time

from taskforge.locks import (
    ACQUIRED,
    DELEGATED,
    DelegationTicketLock,
    PartitionedTicketLock,
)


def wait_until(pred, timeout=10.0, msg="condition"):
    deadline = time.monotonic() + timeout
    while not pred():
        assert time.monotonic() < deadline, f"timed out waiting for {msg}"
        time.sleep(1e-4)


def start_all(*targets):
    threads = [threading.Thread(target=t, daemon=True) for t in targets]
    for t in threads:
        t.start()
    return threads


def join_all(threads, timeout=30.0):
    for t in threads:
        t.join(timeout)
        assert not t.is_alive(), "worker thread hung"


# ---------------------------------------------------------------- PTLock


def test_fresh_lock_first_caller_acquires_immediately():
    lk = PartitionedTicketLock(4)
    assert lk.is_free()
    t0 = time.perf_counter()
    ticket = lk.lock()
    assert ticket == 0
    assert time.perf_counter() - t0 < 0.01  # no waiting happened
    assert not lk.is_free()
    lk.unlock()
    assert lk.is_free()


def test_release_publishes_next_slot():
    lk = PartitionedTicketLock(4)
    lk.lock()
    lk.unlock()
    assert lk._tail == 2
    assert lk._waitq[1] == 1


def test_tickets_increase_per_acquisition():
    lk = PartitionedTicketLock(2)
    for expect in range(5):
        assert lk.lock() == expect
        lk.unlock()
    assert lk.is_free()


def test_try_lock_free_and_held():
    lk = PartitionedTicketLock(4)
    t = lk.try_lock()
    assert t == 0
    assert lk.try_lock() is None
    lk.unlock()
    assert lk.try_lock() == 1
    lk.unlock()
    assert lk.is_free()


def test_failed_try_lock_leaves_no_trace():
    lk = PartitionedTicketLock(4)
    lk.lock()
    for _ in range(3):
        assert lk.try_lock() is None
    lk.unlock()
    # no ticket was consumed by the failed attempts
    assert lk.lock() == 1
    lk.unlock()


def test_size_rounds_up_to_power_of_two():
    assert PartitionedTicketLock(3).size == 4
    assert PartitionedTicketLock(4).size == 4
    assert PartitionedTicketLock(5).size == 8
    assert PartitionedTicketLock(1).size == 2


def test_mutual_exclusion_and_fifo_stress(fast_switch):
    lk = PartitionedTicketLock(4)
    n_threads, rounds = 4, 5_000
    holders = [0]
    counter = [0]
    order: list[int] = []

    def work():
        for _ in range(rounds):
            t = lk.lock()
            holders[0] += 1
            assert holders[0] == 1, "two concurrent owners"
            order.append(t)
            tmp = counter[0]
            counter[0] = tmp + 1
            holders[0] -= 1
            lk.unlock()

    join_all(start_all(*[work] * n_threads))
    assert counter[0] == n_threads * rounds
    assert lk.is_free()
    # acquisitions happen in ticket order
    assert order == sorted(order)
    assert order == list(range(n_threads * rounds))


def test_wraparound_many_laps(fast_switch):
    lk = PartitionedTicketLock(2)  # size 2: a lap every two tickets
    counter = [0]

    def work():
        for _ in range(10_000):
            lk.lock()
            counter[0] += 1
            lk.unlock()

    join_all(start_all(work, work))
    assert counter[0] == 20_000
    assert lk.is_free()


# ---------------------------------------------------------------- DTLock


def test_single_caller_acquires_not_delegated():
    lk = DelegationTicketLock(4)
    status, ticket = lk.lock_or_delegate(0)
    assert status == ACQUIRED
    assert ticket == 0
    assert lk.empty()
    lk.unlock()
    assert lk.is_free()


def test_front_decodes_waiter_id():
    lk = DelegationTicketLock(8)
    lk.lock()
    results = []

    def waiter():
        results.append(lk.lock_or_delegate(3))

    threads = start_all(waiter)
    wait_until(lambda: not lk.empty(), msg="waiter registration")
    assert lk.front() == 3
    lk.set_item(3, "payload")
    lk.pop_front()
    join_all(threads)
    assert results == [(DELEGATED, "payload")]
    # delegation left ownership with us
    assert not lk.is_free()
    lk.unlock()
    assert lk.is_free()


def test_waiter_after_served_one_acquires_on_plain_unlock():
    lk = DelegationTicketLock(8)
    lk.lock()
    results = {}

    def first():
        results["b"] = lk.lock_or_delegate(1)

    def second():
        # queue behind the first waiter
        wait_until(lambda: lk._head.load() >= 2, msg="first waiter ticket")
        results["c"] = lk.lock_or_delegate(2)
        if results["c"][0] == ACQUIRED:
            lk.unlock()

    tb = start_all(first)
    wait_until(lambda: lk._head.load() >= 2, msg="registration")
    tc = start_all(second)
    wait_until(lambda: not lk.empty(), msg="front waiter visible")
    assert lk.front() == 1
    lk.set_item(1, "served")
    lk.pop_front()
    lk.unlock()
    join_all(tb + tc)
    assert results["b"] == (DELEGATED, "served")
    assert results["c"][0] == ACQUIRED
    assert lk.is_free()


def test_set_item_alone_does_not_wake():
    lk = DelegationTicketLock(8)
    lk.lock()
    done = threading.Event()

    def waiter():
        lk.lock_or_delegate(1)
        done.set()

    threads = start_all(waiter)
    wait_until(lambda: not lk.empty(), msg="registration")
    lk.set_item(1, "x")
    assert not done.wait(0.08), "waiter woke without pop_front"
    lk.pop_front()
    assert done.wait(5.0)
    join_all(threads)
    lk.unlock()


def test_plain_unlock_without_set_item_hands_over_ownership():
    lk = DelegationTicketLock(8)
    lk.lock()
    results = []

    def waiter():
        st, val = lk.lock_or_delegate(1)
        results.append((st, val))
        if st == ACQUIRED:
            lk.unlock()

    threads = start_all(waiter)
    wait_until(lambda: not lk.empty(), msg="registration")
    lk.unlock()
    join_all(threads)
    assert results[0][0] == ACQUIRED
    assert lk.is_free()


def test_fifo_serving_of_three_waiters():
    lk = DelegationTicketLock(16)
    lk.lock()
    results = {}
    ids = [5, 2, 9]

    def waiter(wid, turn):
        # tickets are handed out by arrival; gate arrivals one at a time
        wait_until(lambda: lk._head.load() == turn, msg=f"turn of {wid}")
        results[wid] = lk.lock_or_delegate(wid)

    threads = start_all(*[lambda w=w, k=k: waiter(w, k + 1) for k, w in enumerate(ids)])
    wait_until(lambda: lk._head.load() == 4, msg="all registered")

    served = []
    while len(served) < 3:
        wait_until(lambda: not lk.empty(), msg="front waiter visible")
        wid = lk.front()
        served.append(wid)
        lk.set_item(wid, f"item-{wid}")
        lk.pop_front()
    lk.unlock()

    join_all(threads)
    assert served == ids
    # nobody became owner mid-serve: all three took the delegated path
    for wid in ids:
        assert results[wid] == (DELEGATED, f"item-{wid}")
    assert lk.is_free()


def test_delegation_exactness_stress(fast_switch):
    n_threads, rounds = 4, 2_000
    lk = DelegationTicketLock(n_threads)
    counter = [0]
    received: list[list[int]] = [[] for _ in range(n_threads)]
    gifts = [0]
    delegated = [0] * n_threads

    def work(me):
        for _ in range(rounds):
            status, val = lk.lock_or_delegate(me)
            if status == DELEGATED:
                delegated[me] += 1
                received[me].append(val)
                continue
            counter[0] += 1
            received[me].append(counter[0])
            while not lk.empty():
                wid = lk.front()
                counter[0] += 1
                gifts[0] += 1
                lk.set_item(wid, counter[0])
                lk.pop_front()
            lk.unlock()

    join_all(start_all(*[lambda i=i: work(i) for i in range(n_threads)]))
    assert lk.is_free()
    total = n_threads * rounds
    assert counter[0] == total
    # items staged by owners match delegated returns one for one
    assert gifts[0] == sum(delegated)
    # every round produced exactly one distinct value, none lost or duplicated
    flat = [v for per in received for v in per]
    assert len(flat) == total
    assert sorted(flat) == list(range(1, total + 1))


def test_dtlock_wraparound(fast_switch):
    lk = DelegationTicketLock(2)
    counter = [0]

    def work(me):
        for _ in range(5_000):
            status, _ = lk.lock_or_delegate(me)
            if status == DELEGATED:
                continue  # the owner already counted this round
            counter[0] += 1
            while not lk.empty():
                wid = lk.front()
                counter[0] += 1
                lk.set_item(wid, None)
                lk.pop_front()
            lk.unlock()

    join_all(start_all(lambda: work(0), lambda: work(1)))
    assert counter[0] == 10_000
    assert lk.is_free()
