"""Command line interface: bench, dump, selftest."""

from __future__ import annotations

import argparse
import random
import sys
import tempfile
import time
from typing import List, Optional

from .bench import VARIANT_SYNC, ValidationError, sweep, write_csv
from .config import ConfigError, load_config
from .tracing import dump_csv
from .workloads import WORKLOADS


def _int_list(text: str) -> List[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected comma-separated integers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="taskforge",
        description="Task-parallel runtime: benchmarks, trace dumps, self tests.")
    sub = parser.add_subparsers(dest="cmd")

    b = sub.add_parser("bench", help="run benchmarks and emit a CSV sweep")
    b.add_argument("--benchmark", default="all",
                   choices=sorted(WORKLOADS) + ["all"],
                   help="which workload to run (default: all)")
    b.add_argument("--sizes", type=_int_list, default=None, metavar="N[,N...]",
                   help="problem sizes; cycled across selected benchmarks")
    b.add_argument("--blocks", type=_int_list, default=[10, 20, 40],
                   metavar="B[,B...]", help="block sizes to sweep")
    b.add_argument("--workers", type=int, default=0,
                   help="worker threads (0 = machine default)")
    b.add_argument("--variant", default="optimized",
                   choices=sorted(VARIANT_SYNC),
                   help="scheduler variant to benchmark")
    b.add_argument("--reps", type=int, default=5,
                   help="repetitions per row (default 5)")
    b.add_argument("--out", default="-",
                   help="CSV output path (default stdout)")
    b.add_argument("--trace", default=None, metavar="DIR",
                   help="also record a trace of the first rep of each row")

    d = sub.add_parser("dump", help="convert a trace directory to CSV")
    d.add_argument("trace_dir", help="directory holding trace_*.tfb files")
    d.add_argument("--out", default="-",
                   help="CSV output path (default stdout)")

    s = sub.add_parser("selftest", help="run the built-in correctness checks")
    s.add_argument("--workers", type=int, default=4,
                   help="worker threads for the runtime checks")
    return parser


def _cmd_bench(args) -> int:
    names = sorted(WORKLOADS) if args.benchmark == "all" else [args.benchmark]
    sizes = None
    if args.sizes:
        sizes = {name: args.sizes[i % len(args.sizes)]
                 for i, name in enumerate(names)}
    rows = sweep(names, blocks=args.blocks, variants=[args.variant],
                 workers=args.workers, sizes=sizes, reps=args.reps,
                 trace_dir=args.trace)
    if args.out == "-":
        write_csv(rows, sys.stdout)
    else:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            write_csv(rows, fh)
        print(f"wrote {len(rows)} rows to {args.out}", file=sys.stderr)
    return 0


def _cmd_dump(args) -> int:
    if args.out == "-":
        dump_csv(args.trace_dir, sys.stdout)
    else:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            rows = dump_csv(args.trace_dir, fh)
        print(f"wrote {rows} rows to {args.out}", file=sys.stderr)
    return 0


def _selftest_locks() -> str:
    from .modelcheck import check_dtlock, check_ptlock

    pt = check_ptlock()
    if not pt.ok:
        return f"ticket lock model check: {pt.violations[:1]}"
    dt = check_dtlock()
    if not dt.ok:
        return f"delegation lock model check: {dt.violations[:1]}"
    return ""


def _selftest_runtime(workers: int) -> str:
    from . import Runtime, spawn, taskwait
    from .verify import check_intervals, count_tasks, random_task_tree

    for seed in (7, 23, 91):
        rng = random.Random(seed)
        roots = random_task_tree(rng, max_tasks=50, n_addresses=6,
                                 max_depth=3, max_work=5)
        intervals = {}

        def make_body(spec):
            def body():
                start = time.monotonic_ns()
                if spec.work:
                    time.sleep(spec.work * 1e-5)
                for child in spec.children:
                    spawn(make_body(child), child.decls, label=child.label)
                if spec.children:
                    taskwait()
                intervals[spec.label] = (start, time.monotonic_ns())
            return body

        def root_body():
            for spec in roots:
                spawn(make_body(spec), spec.decls, label=spec.label)
            taskwait()

        rt = Runtime(load_config(workers=workers))
        rt.run(root_body)
        if len(intervals) != count_tasks(roots):
            return f"seed {seed}: {len(intervals)} of {count_tasks(roots)} tasks ran"
        bad = check_intervals(roots, intervals)
        if bad:
            return f"seed {seed}: {bad[0]}"
        if rt.live_task_count() != 0:
            return f"seed {seed}: {rt.live_task_count()} tasks leaked"
    return ""


def _selftest_bench() -> str:
    cfg_sizes = {"dotsum": 400}
    try:
        rows = sweep(["dotsum"], blocks=[50], variants=["optimized"],
                     workers=2, sizes=cfg_sizes, reps=2)
    except ValidationError as exc:
        return str(exc)
    if len(rows) != 1 or rows[0].efficiency != 1.0:
        return f"unexpected sweep output: {rows}"
    return ""


def _selftest_trace() -> str:
    import io

    from .tracing import Tracer

    with tempfile.TemporaryDirectory() as d:
        t = Tracer(d, 2)
        for i in range(64):
            t.emit(i % 2, "task_start", i)
        t.close()
        out = io.StringIO()
        rows = dump_csv(d, out)
        if rows != 64 + 2:  # records plus one flush marker per worker
            return f"expected 66 rows, got {rows}"
        stamps = [int(line.split(",")[0])
                  for line in out.getvalue().splitlines()[1:]]
        if stamps != sorted(stamps):
            return "dump not time-ordered"
    return ""


def _cmd_selftest(args) -> int:
    checks = [
        ("lock protocol model check", _selftest_locks),
        ("runtime ordering oracle", lambda: _selftest_runtime(args.workers)),
        ("benchmark validation", _selftest_bench),
        ("trace round trip", _selftest_trace),
    ]
    failed = False
    for name, fn in checks:
        try:
            problem = fn()
        except Exception as exc:  # a crash is a failure, not an abort
            problem = repr(exc)
        if problem:
            print(f"FAIL {name}: {problem}")
            failed = True
        else:
            print(f"ok   {name}")
    return 1 if failed else 0


def main(argv: Optional[List[str]] = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    if not argv:
        parser.print_usage(sys.stderr)
        return 2
    args = parser.parse_args(argv)
    if args.cmd is None:
        parser.print_usage(sys.stderr)
        return 2
    try:
        if args.cmd == "bench":
            return _cmd_bench(args)
        if args.cmd == "dump":
            return _cmd_dump(args)
        return _cmd_selftest(args)
    except (ValidationError, ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
