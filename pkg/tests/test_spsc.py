from __future__ import annotations

import threading
import time

import pytest

from taskforge.spsc import SpscQueue


def test_push_pop_single_item():
    q = SpscQueue(4)
    assert q.pop() is None
    assert q.push("x")
    assert q.pop() == "x"
    assert q.pop() is None


def test_full_queue_rejects_push():
    q = SpscQueue(3)
    for i in range(3):
        assert q.push(i)
    assert not q.push(99)
    assert q.pop() == 0
    assert q.push(99)


def test_capacity_one():
    q = SpscQueue(1)
    assert q.push(7)
    assert not q.push(8)
    assert q.pop() == 7
    assert q.pop() is None


def test_rejects_zero_capacity():
    with pytest.raises(ValueError):
        SpscQueue(0)


def test_fifo_order_with_wraparound():
    q = SpscQueue(8)
    out = []
    for i in range(50):
        assert q.push(i)
        if i >= 4:  # keep ~5 queued so the indices lap the ring repeatedly
            out.append(q.pop())
    while (item := q.pop()) is not None:
        out.append(item)
    assert out == list(range(50))


def test_len_tracks_occupancy():
    q = SpscQueue(8)
    assert len(q) == 0
    for i in range(5):
        q.push(i)
    assert len(q) == 5
    q.pop()
    assert len(q) == 4


def test_concurrent_producer_consumer_preserves_sequence(fast_switch):
    q = SpscQueue(64)
    n = 100_000
    consumed = []

    def produce():
        i = 0
        while i < n:
            if q.push(i):
                i += 1
            else:
                time.sleep(20e-6)

    def consume():
        while len(consumed) < n:
            item = q.pop()
            if item is not None:
                consumed.append(item)
            else:
                time.sleep(20e-6)

    p = threading.Thread(target=produce)
    c = threading.Thread(target=consume)
    p.start()
    c.start()
    p.join()
    c.join()
    assert consumed == list(range(n))
