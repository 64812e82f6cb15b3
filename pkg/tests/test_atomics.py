from __future__ import annotations

import threading

from taskforge.atomics import AtomicInt


def test_load_store():
    a = AtomicInt(5)
    assert a.load() == 5
    a.store(-3)
    assert a.load() == -3


def test_fetch_add_returns_previous():
    a = AtomicInt(10)
    assert a.fetch_add(2) == 10
    assert a.load() == 12
    assert a.fetch_sub(5) == 12
    assert a.load() == 7


def test_fetch_or_returns_previous():
    a = AtomicInt(0b0101)
    assert a.fetch_or(0b0011) == 0b0101
    assert a.load() == 0b0111
    # idempotent once set
    assert a.fetch_or(0b0011) == 0b0111
    assert a.load() == 0b0111


def test_compare_exchange():
    a = AtomicInt(1)
    assert a.compare_exchange(1, 9)
    assert a.load() == 9
    assert not a.compare_exchange(1, 5)
    assert a.load() == 9


def test_fetch_add_is_atomic_across_threads(fast_switch):
    a = AtomicInt(0)
    n_threads, per_thread = 8, 20_000

    def bump():
        for _ in range(per_thread):
            a.fetch_add(1)

    threads = [threading.Thread(target=bump) for _ in range(n_threads)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert a.load() == n_threads * per_thread


def test_fetch_or_unique_bits_across_threads(fast_switch):
    a = AtomicInt(0)
    seen_prev = [0] * 16

    def setter(i):
        seen_prev[i] = a.fetch_or(1 << i)

    threads = [threading.Thread(target=setter, args=(i,)) for i in range(16)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert a.load() == (1 << 16) - 1
    # every bit was absent in the value its setter observed
    for i, prev in enumerate(seen_prev):
        assert prev & (1 << i) == 0
