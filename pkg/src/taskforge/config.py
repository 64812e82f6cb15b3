"""Runtime configuration: defaults, config file, environment overrides.

Precedence, lowest to highest: built-in defaults, a ``key = value``
config file, then ``TASKFORGE_*`` environment variables.  Dots in key
names map to underscores in the environment (``scheduler.policy`` is
overridden by ``TASKFORGE_SCHEDULER_POLICY``).  The resulting object is
frozen; the runtime reads it once at startup.
"""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass
from typing import Optional

__all__ = ["RuntimeConfig", "load_config", "ConfigError"]

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


class ConfigError(ValueError):
    pass


def _parse_bool(key: str, raw: str) -> bool:
    low = raw.strip().lower()
    if low in _TRUE:
        return True
    if low in _FALSE:
        return False
    raise ConfigError(f"{key}: expected a boolean, got {raw!r}")


def _parse_int(key: str, raw: str) -> int:
    try:
        return int(raw.strip(), 0)
    except ValueError:
        raise ConfigError(f"{key}: expected an integer, got {raw!r}") from None


@dataclass(frozen=True)
class RuntimeConfig:
    workers: int = 0                      # 0 = use cpu count
    scheduler_policy: str = "fifo"        # fifo | lifo
    scheduler_sync: str = "dtlock"        # dtlock | ptlock | mutex
    scheduler_nq: int = 0                 # 0 = auto
    scheduler_capacity: int = 512
    scheduler_redrain: bool = False       # re-drain buffers between serves
    dependency_auditing: bool = False
    trace_enabled: bool = False
    trace_dir: str = "trace"

    def validate(self) -> "RuntimeConfig":
        if self.workers < 0:
            raise ConfigError(f"workers: must be >= 0, got {self.workers}")
        if self.scheduler_policy not in ("fifo", "lifo"):
            raise ConfigError(f"scheduler.policy: unknown value {self.scheduler_policy!r}")
        if self.scheduler_sync not in ("dtlock", "ptlock", "mutex"):
            raise ConfigError(f"scheduler.sync: unknown value {self.scheduler_sync!r}")
        if self.scheduler_nq < 0:
            raise ConfigError(f"scheduler.nq: must be >= 0, got {self.scheduler_nq}")
        if self.scheduler_capacity < 1:
            raise ConfigError(f"scheduler.capacity: must be >= 1, got {self.scheduler_capacity}")
        return self

    def effective_workers(self) -> int:
        if self.workers > 0:
            return self.workers
        return max(1, os.cpu_count() or 1)


# key in file -> (field name, parser)
_KEYS = {
    "workers": ("workers", _parse_int),
    "scheduler.policy": ("scheduler_policy", lambda k, v: v.strip().lower()),
    "scheduler.sync": ("scheduler_sync", lambda k, v: v.strip().lower()),
    "scheduler.nq": ("scheduler_nq", _parse_int),
    "scheduler.capacity": ("scheduler_capacity", _parse_int),
    "scheduler.redrain": ("scheduler_redrain", _parse_bool),
    "dependency.auditing": ("dependency_auditing", _parse_bool),
    "trace.enabled": ("trace_enabled", _parse_bool),
    "trace.dir": ("trace_dir", lambda k, v: v.strip()),
}


def _parse_file(path: str) -> dict:
    out = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            if "=" not in stripped:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, _, value = stripped.partition("=")
            key = key.strip()
            if key not in _KEYS:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            field, parse = _KEYS[key]
            out[field] = parse(key, value)
    return out


def _env_overrides(environ=None) -> dict:
    env = os.environ if environ is None else environ
    out = {}
    for key, (field, parse) in _KEYS.items():
        name = "TASKFORGE_" + key.replace(".", "_").upper()
        if name in env:
            out[field] = parse(name, env[name])
    return out


def load_config(path: Optional[str] = None, environ=None, **overrides) -> RuntimeConfig:
    """Build a config from defaults, then file, then env, then kwargs."""
    fields = {}
    if path is not None:
        fields.update(_parse_file(path))
    fields.update(_env_overrides(environ))
    fields.update(overrides)
    known = {f.name for f in dataclasses.fields(RuntimeConfig)}
    unknown = set(fields) - known
    if unknown:
        raise ConfigError(f"unknown config fields: {sorted(unknown)}")
    return RuntimeConfig(**fields).validate()
