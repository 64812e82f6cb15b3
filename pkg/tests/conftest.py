from __future__ import annotations

import sys

import pytest


@pytest.fixture
def fast_switch():
    """Shrink the interpreter's thread switch interval for stress tests.

    The default 5 ms quantum lets a thread get preempted while holding a
    lock and not run again for many milliseconds, which turns contended
    stress tests into minute-long waits without exercising anything new.
    """
    old = sys.getswitchinterval()
    sys.setswitchinterval(0.0005)
    yield
    sys.setswitchinterval(old)
