"""taskforge: a task-parallel runtime with declared data dependencies.

Tasks are plain callables.  Each one declares the addresses it reads
and writes; the runtime runs it once every declared access is
satisfied, and tasks spawned inside other tasks synchronize through
the same rules at their own nesting level.

    from taskforge import run, spawn

    def root():
        data = {"x": 0}
        def bump():
            data["x"] += 1
        spawn(bump, [("x", "write")])
        spawn(bump, [("x", "write")])

    run(root)
"""

from .config import ConfigError, RuntimeConfig, load_config
from .deps import AccessType
from .runtime import (
    Runtime,
    RuntimeStateError,
    Task,
    TaskFailure,
    current_task,
    run,
    spawn,
    taskwait,
)

READ = AccessType.READ
WRITE = AccessType.WRITE
READWRITE = AccessType.READWRITE

__version__ = "0.1.0"

__all__ = [
    "AccessType",
    "ConfigError",
    "READ",
    "READWRITE",
    "Runtime",
    "RuntimeConfig",
    "RuntimeStateError",
    "Task",
    "TaskFailure",
    "WRITE",
    "current_task",
    "load_config",
    "run",
    "spawn",
    "taskwait",
    "__version__",
]
