"""Numeric block kernels used by the benchmark workloads.

Two interchangeable backends: numba-jitted loops (default when numba
imports) and plain numpy.  Select explicitly with TASKFORGE_KERNELS set
to "numba" or "numpy".  Within one process the choice is fixed, so a
parallel run and its serial oracle always produce bitwise identical
results; across backends results agree only to float rounding.

All kernels take whole arrays plus index bounds instead of slices so
the jitted versions allocate nothing.
"""

from __future__ import annotations

import os
import warnings

import numpy as np

__all__ = [
    "active_backend",
    "work_spin",
    "chain_step",
    "stencil_block",
    "matmul_block",
    "dot_block",
    "warm_up",
]

try:
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is an install dependency
    _HAVE_NUMBA = False

_choice = os.environ.get("TASKFORGE_KERNELS", "").strip().lower()
if _choice not in ("numba", "numpy", ""):
    warnings.warn(f"TASKFORGE_KERNELS={_choice!r} not recognized; "
                  "expected 'numba' or 'numpy'", RuntimeWarning)
    _choice = ""
if _choice == "numba" and not _HAVE_NUMBA:
    warnings.warn("TASKFORGE_KERNELS=numba but numba is not importable; "
                  "falling back to numpy", RuntimeWarning)
    _choice = "numpy"
if not _choice:
    _choice = "numba" if _HAVE_NUMBA else "numpy"

_BACKEND = _choice


def active_backend() -> str:
    return _BACKEND


# -- pure numpy / python versions --------------------------------------------

def _np_work_spin(out: np.ndarray, idx: int, reps: int) -> None:
    acc = out[idx]
    for _ in range(reps):
        acc = acc * 1.0000001 + 0.3
    out[idx] = acc


def _np_chain_step(x: np.ndarray, lo: int, hi: int, a: float, b: float) -> None:
    x[lo:hi] *= a
    x[lo:hi] += b


def _np_stencil_block(src: np.ndarray, dst: np.ndarray, lo: int, hi: int) -> None:
    n = src.shape[0]
    left = src[max(lo - 1, 0):hi - 1]
    if lo == 0:
        left = np.concatenate((src[:1], left))
    right = src[lo + 1:min(hi + 1, n)]
    if hi == n:
        right = np.concatenate((right, src[-1:]))
    dst[lo:hi] = (left + src[lo:hi] + right) / 3.0


def _np_matmul_block(a: np.ndarray, b: np.ndarray, c: np.ndarray,
                     i0: int, i1: int, j0: int, j1: int, k0: int, k1: int) -> None:
    c[i0:i1, j0:j1] += a[i0:i1, k0:k1] @ b[k0:k1, j0:j1]


def _np_dot_block(a: np.ndarray, b: np.ndarray, lo: int, hi: int) -> float:
    return float(a[lo:hi] @ b[lo:hi])


# -- numba versions -----------------------------------------------------------

if _BACKEND == "numba":

    @njit(cache=True, nogil=True)
    def _nb_work_spin(out, idx, reps):
        acc = out[idx]
        for _ in range(reps):
            acc = acc * 1.0000001 + 0.3
        out[idx] = acc

    @njit(cache=True, nogil=True)
    def _nb_chain_step(x, lo, hi, a, b):
        for i in range(lo, hi):
            x[i] = x[i] * a + b

    @njit(cache=True, nogil=True)
    def _nb_stencil_block(src, dst, lo, hi):
        n = src.shape[0]
        for i in range(lo, hi):
            l = src[i - 1] if i > 0 else src[0]
            r = src[i + 1] if i + 1 < n else src[n - 1]
            dst[i] = (l + src[i] + r) / 3.0

    @njit(cache=True, nogil=True)
    def _nb_matmul_block(a, b, c, i0, i1, j0, j1, k0, k1):
        for i in range(i0, i1):
            for j in range(j0, j1):
                s = c[i, j]
                for k in range(k0, k1):
                    s += a[i, k] * b[k, j]
                c[i, j] = s

    @njit(cache=True, nogil=True)
    def _nb_dot_block(a, b, lo, hi):
        s = 0.0
        for i in range(lo, hi):
            s += a[i] * b[i]
        return s

    work_spin = _nb_work_spin
    chain_step = _nb_chain_step
    stencil_block = _nb_stencil_block
    matmul_block = _nb_matmul_block
    dot_block = _nb_dot_block
else:
    work_spin = _np_work_spin
    chain_step = _np_chain_step
    stencil_block = _np_stencil_block
    matmul_block = _np_matmul_block
    dot_block = _np_dot_block


def warm_up() -> None:
    """Trigger jit compilation outside any timed region."""
    out = np.zeros(2)
    work_spin(out, 0, 1)
    chain_step(out, 0, 2, 1.0, 0.0)
    src = np.arange(8, dtype=np.float64)
    dst = np.zeros_like(src)
    stencil_block(src, dst, 0, 8)
    a = np.ones((4, 4))
    matmul_block(a, a, np.zeros((4, 4)), 0, 4, 0, 4, 0, 4)
    dot_block(src, src, 0, 8)
