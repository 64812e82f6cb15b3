"""Benchmark workloads and their serial reference runs.

Every workload can execute the same computation two ways: as a task
graph on the runtime, and as a plain sequential loop that calls the
same kernels in the same per-block order.  Because both paths share
kernels and ordering, results must match bit for bit; the benchmark
driver refuses to time anything that does not.

Granularity is controlled by the block argument: bigger blocks mean
fewer, heavier tasks.
"""

from __future__ import annotations

import numpy as np

from . import run, spawn, taskwait
from .kernels import chain_step, dot_block, matmul_block, stencil_block, work_spin

__all__ = ["WORKLOADS", "SpawnStorm", "Chain", "Stencil", "MatMul", "DotSum"]

STENCIL_ITERS = 8


def _blocks(n: int, block: int):
    return [(lo, min(lo + block, n)) for lo in range(0, n, block)]


class SpawnStorm:
    """size independent tasks, no dependencies; block = spin reps per task."""

    name = "spawn_storm"

    def __init__(self, size: int, block: int, seed: int = 0):
        self.n_tasks = size
        self.reps = max(1, block)
        self.work_units_per_task = self.reps
        self.useful_units = float(size)

    def run_serial(self) -> np.ndarray:
        out = np.zeros(self.n_tasks)
        for i in range(self.n_tasks):
            work_spin(out, i, self.reps)
        return out

    def run_parallel(self, cfg) -> np.ndarray:
        out = np.zeros(self.n_tasks)
        reps = self.reps

        def root():
            def make(i):
                def body():
                    work_spin(out, i, reps)
                return body
            for i in range(self.n_tasks):
                spawn(make(i))
            taskwait()

        run(root, cfg)
        return out


class Chain:
    """size tasks in one write-after-write chain; block = vector length."""

    name = "chain"

    def __init__(self, size: int, block: int, seed: int = 0):
        self.n_tasks = size
        self.width = max(1, block)
        self.work_units_per_task = self.width
        self.useful_units = float(size)
        rng = np.random.default_rng(seed)
        self.x0 = rng.standard_normal(self.width)

    def _coeff(self, i: int):
        return 1.0 + 1e-9 * (i % 7), 1e-6 * (i % 5)

    def run_serial(self) -> np.ndarray:
        x = self.x0.copy()
        for i in range(self.n_tasks):
            a, b = self._coeff(i)
            chain_step(x, 0, self.width, a, b)
        return x

    def run_parallel(self, cfg) -> np.ndarray:
        x = self.x0.copy()
        width = self.width

        def root():
            def make(i):
                a, b = self._coeff(i)
                def body():
                    chain_step(x, 0, width, a, b)
                return body
            for i in range(self.n_tasks):
                spawn(make(i), [("x", "write")])
            taskwait()

        run(root, cfg)
        return x


class Stencil:
    """Blocked 1-D three-point averaging sweep over STENCIL_ITERS rounds.

    Each (iteration, block) task declares READ on its neighbor blocks
    and WRITE on its own, which chains the sweep without any barrier.
    """

    name = "stencil"

    def __init__(self, size: int, block: int, seed: int = 0):
        self.n = size
        self.block = block
        self.spans = _blocks(size, block)
        self.work_units_per_task = block
        self.useful_units = float(size * STENCIL_ITERS)
        rng = np.random.default_rng(seed)
        self.x0 = rng.standard_normal(size)

    def run_serial(self) -> np.ndarray:
        bufs = [self.x0.copy(), np.zeros_like(self.x0)]
        for it in range(STENCIL_ITERS):
            src, dst = bufs[it % 2], bufs[(it + 1) % 2]
            for lo, hi in self.spans:
                stencil_block(src, dst, lo, hi)
        return bufs[STENCIL_ITERS % 2]

    def run_parallel(self, cfg) -> np.ndarray:
        bufs = [self.x0.copy(), np.zeros_like(self.x0)]
        spans = self.spans
        nb = len(spans)

        def root():
            def make(src, dst, lo, hi):
                def body():
                    stencil_block(src, dst, lo, hi)
                return body
            for it in range(STENCIL_ITERS):
                src, dst = bufs[it % 2], bufs[(it + 1) % 2]
                for bi, (lo, hi) in enumerate(spans):
                    decls = [(bi, "write")]
                    if bi > 0:
                        decls.append((bi - 1, "read"))
                    if bi + 1 < nb:
                        decls.append((bi + 1, "read"))
                    spawn(make(src, dst, lo, hi), decls)
            taskwait()

        run(root, cfg)
        return bufs[STENCIL_ITERS % 2]


class MatMul:
    """Blocked dense matmul; one task per (i, j, k) block triple.

    The WRITE on the output block serializes the k accumulation in
    spawn order, so the summation order matches the serial loop nest
    exactly.
    """

    name = "matmul"

    def __init__(self, size: int, block: int, seed: int = 0):
        if size % block:
            raise ValueError(f"matmul size {size} not a multiple of block {block}")
        self.n = size
        self.block = block
        self.nb = size // block
        self.work_units_per_task = block * block * block
        self.useful_units = float(2 * size ** 3)
        rng = np.random.default_rng(seed)
        self.a = rng.standard_normal((size, size))
        self.b = rng.standard_normal((size, size))

    def run_serial(self) -> np.ndarray:
        c = np.zeros((self.n, self.n))
        s = self.block
        for i in range(self.nb):
            for j in range(self.nb):
                for k in range(self.nb):
                    matmul_block(self.a, self.b, c, i * s, (i + 1) * s,
                                 j * s, (j + 1) * s, k * s, (k + 1) * s)
        return c

    def run_parallel(self, cfg) -> np.ndarray:
        c = np.zeros((self.n, self.n))
        a, b, s = self.a, self.b, self.block

        def root():
            def make(i, j, k):
                def body():
                    matmul_block(a, b, c, i * s, (i + 1) * s,
                                 j * s, (j + 1) * s, k * s, (k + 1) * s)
                return body
            for i in range(self.nb):
                for j in range(self.nb):
                    for k in range(self.nb):
                        spawn(make(i, j, k), [
                            (("a", i, k), "read"),
                            (("b", k, j), "read"),
                            (("c", i, j), "write"),
                        ])
            taskwait()

        run(root, cfg)
        return c


class DotSum:
    """Blocked dot product: per-block partials, then one fan-in task."""

    name = "dotsum"

    def __init__(self, size: int, block: int, seed: int = 0):
        self.n = size
        self.spans = _blocks(size, block)
        self.work_units_per_task = block
        self.useful_units = float(size)
        rng = np.random.default_rng(seed)
        self.a = rng.standard_normal(size)
        self.b = rng.standard_normal(size)

    def _finish(self, partials: np.ndarray) -> float:
        total = 0.0
        for p in partials:
            total += p
        return float(total)

    def run_serial(self) -> float:
        partials = np.zeros(len(self.spans))
        for i, (lo, hi) in enumerate(self.spans):
            partials[i] = dot_block(self.a, self.b, lo, hi)
        return self._finish(partials)

    def run_parallel(self, cfg) -> float:
        partials = np.zeros(len(self.spans))
        result = [0.0]
        a, b = self.a, self.b

        def root():
            def make(i, lo, hi):
                def body():
                    partials[i] = dot_block(a, b, lo, hi)
                return body
            for i, (lo, hi) in enumerate(self.spans):
                spawn(make(i, lo, hi), [(("p", i), "write")])

            def fanin():
                result[0] = self._finish(partials)

            decls = [(("p", i), "read") for i in range(len(self.spans))]
            spawn(fanin, decls)
            taskwait()

        run(root, cfg)
        return result[0]


WORKLOADS = {
    w.name: w for w in (SpawnStorm, Chain, Stencil, MatMul, DotSum)
}
