"""Low-overhead binary event tracing.

Each worker owns a preallocated buffer and is the only thread that
writes to it, so emitting is a pack_into plus an index bump with no
locking.  Records are fixed 24-byte little-endian triples:

    u64 timestampNs | u16 eventId | 6 pad bytes | u64 payload

Buffers are sliced into 64 KiB sub-buffers; whoever owns the buffer
flushes whole sub-buffers between tasks and the remainder at shutdown.
When the buffer is full and no flush has happened yet, new records are
dropped and counted rather than blocking the worker.  A write error
disables tracing for that worker only.

Files are named ``trace_<worker>.tfb`` and start with an 8-byte header:
magic ``TFB1``, u16 format version, u16 record size.
"""

from __future__ import annotations

import csv
import heapq
import os
import struct
import time
import warnings
from typing import IO, List, Optional, Tuple

__all__ = [
    "EVENT_IDS",
    "EVENT_NAMES",
    "RECORD_SIZE",
    "SUB_BUFFER_SIZE",
    "Tracer",
    "read_trace_file",
    "dump_csv",
]

MAGIC = b"TFB1"
VERSION = 1
RECORD_SIZE = 24
SUB_BUFFER_SIZE = 64 * 1024
SUB_BUFFERS_PER_WORKER = 8

_HEADER = struct.Struct("<4sHH")
_RECORD = struct.Struct("<QH6xQ")

EVENT_IDS = {
    "task_create": 1,
    "task_ready": 2,
    "task_start": 3,
    "task_end": 4,
    "sched_enter": 5,
    "sched_serve": 6,
    "sched_leave": 7,
    "deps_deliver": 8,
    "buffer_flush": 9,
}
EVENT_NAMES = {v: k for k, v in EVENT_IDS.items()}


class Tracer:
    """Per-worker buffered trace collector."""

    def __init__(self, trace_dir: str, n_workers: int):
        self.trace_dir = trace_dir
        self.n_workers = n_workers
        cap = SUB_BUFFER_SIZE * SUB_BUFFERS_PER_WORKER
        self._bufs = [bytearray(cap) for _ in range(n_workers)]
        self._pos = [0] * n_workers
        self._cap = cap
        self.emitted = [0] * n_workers
        self.drops = [0] * n_workers
        self._files: List[Optional[IO[bytes]]] = [None] * n_workers
        self._dead = [False] * n_workers
        self._closed = False
        os.makedirs(trace_dir, exist_ok=True)

    # hot path: one dict lookup, one pack_into, no allocation
    def emit(self, worker: int, event: str, payload: int) -> None:
        eid = EVENT_IDS[event]
        self.emitted[worker] += 1
        pos = self._pos[worker]
        if pos + RECORD_SIZE > self._cap:
            self.drops[worker] += 1
            return
        _RECORD.pack_into(self._bufs[worker], pos,
                          time.monotonic_ns(), eid, payload)
        self._pos[worker] = pos + RECORD_SIZE

    def maybe_flush(self, worker: int) -> None:
        """Between tasks: write out the buffer if a sub-buffer filled up."""
        if self._pos[worker] >= SUB_BUFFER_SIZE:
            self._flush(worker)

    def _flush(self, worker: int) -> None:
        pos = self._pos[worker]
        if pos == 0 or self._dead[worker]:
            self._pos[worker] = 0
            return
        self.emit(worker, "buffer_flush", pos // RECORD_SIZE)
        pos = self._pos[worker]
        try:
            fh = self._files[worker]
            if fh is None:
                path = os.path.join(self.trace_dir, f"trace_{worker}.tfb")
                fh = open(path, "wb")
                fh.write(_HEADER.pack(MAGIC, VERSION, RECORD_SIZE))
                self._files[worker] = fh
            fh.write(self._bufs[worker][:pos])
        except (OSError, ValueError) as exc:
            self._dead[worker] = True
            warnings.warn(f"tracing disabled for worker {worker}: {exc}",
                          RuntimeWarning, stacklevel=2)
        self._pos[worker] = 0

    def close(self) -> None:
        """Flush every buffer and close the files.  Call after workers stop."""
        if self._closed:
            return
        self._closed = True
        for w in range(self.n_workers):
            self._flush(w)
            fh = self._files[w]
            if fh is not None:
                try:
                    fh.close()
                except OSError:
                    pass
        dropped = sum(self.drops)
        if dropped:
            warnings.warn(
                f"trace dropped {dropped} records (per worker: {self.drops})",
                RuntimeWarning, stacklevel=2)


def read_trace_file(path: str) -> Tuple[List[Tuple[int, int, int]], Optional[int]]:
    """Parse one trace file.

    Returns (records, bad_offset): records as (timestampNs, eventId,
    payload) tuples, and the byte offset where parsing had to stop, or
    None if the whole file was well formed.
    """
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < _HEADER.size:
        return [], 0
    magic, version, recsize = _HEADER.unpack_from(data, 0)
    if magic != MAGIC or recsize != RECORD_SIZE:
        return [], 0
    body = len(data) - _HEADER.size
    usable = body - body % RECORD_SIZE
    records = [
        _RECORD.unpack_from(data, _HEADER.size + off)
        for off in range(0, usable, RECORD_SIZE)
    ]
    bad = None if usable == body else _HEADER.size + usable
    return records, bad


def _worker_of(path: str) -> int:
    stem = os.path.basename(path)
    try:
        return int(stem[len("trace_"):-len(".tfb")])
    except ValueError:
        return -1


def dump_csv(trace_dir: str, out: IO[str]) -> int:
    """Merge all trace files in a directory into CSV, ordered by time.

    Writes a header row even when there are no trace files.  Truncated
    or corrupt files contribute their valid prefix and produce a
    warning naming the junk offset.  Returns the number of rows.
    """
    writer = csv.writer(out)
    writer.writerow(["timestampNs", "worker", "event", "payload"])
    streams: List[List[Tuple[int, int, int, int]]] = []
    try:
        names = sorted(os.listdir(trace_dir))
    except FileNotFoundError:
        names = []
    for name in names:
        if not (name.startswith("trace_") and name.endswith(".tfb")):
            continue
        path = os.path.join(trace_dir, name)
        records, bad = read_trace_file(path)
        if bad is not None:
            warnings.warn(f"{path}: unreadable past byte {bad}; "
                          f"kept {len(records)} records", RuntimeWarning)
        worker = _worker_of(path)
        streams.append([(ts, worker, ev, pl) for ts, ev, pl in records])
    rows = 0
    for ts, worker, ev, pl in heapq.merge(*streams):
        writer.writerow([ts, worker, EVENT_NAMES.get(ev, str(ev)), pl])
        rows += 1
    return rows
