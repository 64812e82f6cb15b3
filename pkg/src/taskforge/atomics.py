"""Small atomic integer cells.

CPython guarantees that a single bytecode-level load or store of an int
attribute is indivisible, so ``load``/``store`` need no lock.  Compound
read-modify-write steps (add, or, compare-exchange) are guarded by a
per-cell mutex so the full cycle is one indivisible step.
"""

from __future__ import annotations

import threading

__all__ = ["AtomicInt"]


class AtomicInt:
    """Integer cell with indivisible read-modify-write operations."""

    __slots__ = ("_value", "_mu")

    def __init__(self, value: int = 0) -> None:
        self._value = value
        self._mu = threading.Lock()

    def load(self) -> int:
        return self._value

    def store(self, value: int) -> None:
        self._value = value

    def fetch_add(self, delta: int = 1) -> int:
        """Add ``delta``, return the value held before the add."""
        with self._mu:
            old = self._value
            self._value = old + delta
            return old

    def fetch_or(self, bits: int) -> int:
        """Or ``bits`` in, return the value held before."""
        with self._mu:
            old = self._value
            self._value = old | bits
            return old

    def fetch_sub(self, delta: int = 1) -> int:
        with self._mu:
            old = self._value
            self._value = old - delta
            return old

    def compare_exchange(self, expected: int, desired: int) -> bool:
        """Set to ``desired`` only if currently ``expected``."""
        with self._mu:
            if self._value != expected:
                return False
            self._value = desired
            return True

    def __repr__(self) -> str:  # pragma: no cover
        return f"AtomicInt({self._value})"
