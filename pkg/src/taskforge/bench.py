"""Benchmark driver: validate against the serial oracle, time, sweep.

A row is one (benchmark, variant, block) combination.  The parallel
result must equal the serial reference exactly before any timing is
recorded; a mismatch raises instead of producing numbers.  Efficiency
is each row's metric divided by the best metric seen for that benchmark
anywhere in the sweep, so the peak row scores 1.0 and everything else
is a fraction of it.
"""

from __future__ import annotations

import csv
import os
import statistics
import time
from dataclasses import dataclass
from typing import IO, Dict, Iterable, List, Optional, Sequence

import numpy as np

from .config import RuntimeConfig, load_config
from .kernels import warm_up
from .workloads import WORKLOADS

__all__ = [
    "VARIANT_SYNC",
    "DEFAULT_SIZES",
    "BenchRow",
    "ValidationError",
    "time_workload",
    "sweep",
    "write_csv",
]

VARIANT_SYNC = {
    "optimized": "dtlock",
    "no-dtlock": "ptlock",
    "mutex": "mutex",
}

# sizes that give each workload a comparable task count at the default
# block sweep of 10/20/40
DEFAULT_SIZES = {
    "spawn_storm": 800,
    "chain": 400,
    "stencil": 2000,
    "matmul": 80,
    "dotsum": 8000,
}


class ValidationError(RuntimeError):
    """Parallel result differed from the serial reference."""


@dataclass
class BenchRow:
    benchmark: str
    variant: str
    block: int
    work_units_per_task: int
    perf: float
    efficiency: float
    stddev: float


def _results_equal(got, expected) -> bool:
    if isinstance(expected, float):
        return got == expected
    return isinstance(got, np.ndarray) and np.array_equal(got, expected)


def time_workload(workload, cfg: RuntimeConfig, reps: int,
                  trace_dir: Optional[str] = None):
    """Return (mean metric, stddev) over reps validated runs."""
    expected = workload.run_serial()
    perfs = []
    for rep in range(reps):
        run_cfg = cfg
        if trace_dir is not None and rep == 0:
            run_cfg = load_config(
                workers=cfg.workers,
                scheduler_policy=cfg.scheduler_policy,
                scheduler_sync=cfg.scheduler_sync,
                scheduler_nq=cfg.scheduler_nq,
                scheduler_capacity=cfg.scheduler_capacity,
                trace_enabled=True,
                trace_dir=trace_dir,
            )
        t0 = time.perf_counter()
        got = workload.run_parallel(run_cfg)
        elapsed = time.perf_counter() - t0
        if not _results_equal(got, expected):
            raise ValidationError(
                f"{workload.name}: parallel result differs from the serial "
                f"reference (rep {rep})")
        perfs.append(workload.useful_units / elapsed)
    mean = statistics.fmean(perfs)
    std = statistics.stdev(perfs) if len(perfs) >= 2 else 0.0
    return mean, std


def sweep(benchmarks: Iterable[str], blocks: Sequence[int],
          variants: Sequence[str], workers: int = 0,
          sizes: Optional[Dict[str, int]] = None, reps: int = 5,
          trace_dir: Optional[str] = None) -> List[BenchRow]:
    warm_up()
    rows: List[BenchRow] = []
    for name in benchmarks:
        try:
            factory = WORKLOADS[name]
        except KeyError:
            raise ValueError(f"unknown benchmark {name!r}") from None
        size = (sizes or {}).get(name, DEFAULT_SIZES[name])
        for variant in variants:
            try:
                sync = VARIANT_SYNC[variant]
            except KeyError:
                raise ValueError(f"unknown variant {variant!r}") from None
            cfg = load_config(workers=workers, scheduler_sync=sync)
            for block in blocks:
                workload = factory(size, block)
                tdir = None
                if trace_dir is not None:
                    tdir = os.path.join(
                        trace_dir, f"{name}_{variant}_b{block}")
                perf, std = time_workload(workload, cfg, reps, trace_dir=tdir)
                rows.append(BenchRow(name, variant, block,
                                     workload.work_units_per_task,
                                     perf, 0.0, std))
    # efficiency: normalize within each benchmark across the whole sweep
    best: Dict[str, float] = {}
    for row in rows:
        best[row.benchmark] = max(best.get(row.benchmark, 0.0), row.perf)
    for row in rows:
        peak = best[row.benchmark]
        row.efficiency = row.perf / peak if peak > 0 else 0.0
    return rows


def write_csv(rows: List[BenchRow], out: IO[str]) -> None:
    writer = csv.writer(out)
    writer.writerow(["benchmark", "variant", "blockSize", "workUnitsPerTask",
                     "perfMetric", "efficiency", "stddev"])
    for r in rows:
        writer.writerow([r.benchmark, r.variant, r.block,
                         r.work_units_per_task,
                         f"{r.perf:.6g}", f"{r.efficiency:.4f}",
                         f"{r.stddev:.6g}"])
