"""Launch configuration files.

A config is a small TOML document (schema version 1)::

    schema = 1
    threads = 4          # launch size N
    warp_size = 32       # optional
    inputs = ["x"]       # optional; defaults to the kernel's `in` arrays
    outputs = ["y"]      # optional; defaults to the kernel's `out` arrays
    [params]
    N = 4

    [b]                  # optional per-kernel overrides for the second kernel
    threads = 1

Override tables ``[a]`` and ``[b]`` accept ``threads``, ``warp_size`` and
``params``; inputs and outputs are shared so the two kernels stay comparable.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

SCHEMA_VERSION = 1

_TOP_KEYS = {"schema", "threads", "warp_size", "params", "inputs", "outputs", "a", "b"}
_OVERRIDE_KEYS = {"threads", "warp_size", "params"}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class LaunchConfig:
    threads: int
    warp_size: int = 32
    params: Mapping[str, int] = field(default_factory=dict)
    inputs: tuple[str, ...] | None = None
    outputs: tuple[str, ...] | None = None
    overrides: Mapping[str, Mapping] = field(default_factory=dict)

    def __post_init__(self):
        if not isinstance(self.threads, int) or isinstance(self.threads, bool) or self.threads < 1:
            raise ConfigError(f"threads must be a positive integer, got {self.threads!r}")
        if not isinstance(self.warp_size, int) or isinstance(self.warp_size, bool) or self.warp_size < 1:
            raise ConfigError(f"warp_size must be a positive integer, got {self.warp_size!r}")
        for k, v in self.params.items():
            if not isinstance(v, int) or isinstance(v, bool):
                raise ConfigError(f"parameter {k} must be an integer, got {v!r}")

    def for_kernel(self, which: str) -> "LaunchConfig":
        """The effective config for kernel ``"a"`` or ``"b"``."""
        ov = self.overrides.get(which)
        if not ov:
            return replace(self, overrides={})
        params = dict(self.params)
        params.update(ov.get("params", {}))
        return replace(
            self,
            threads=ov.get("threads", self.threads),
            warp_size=ov.get("warp_size", self.warp_size),
            params=params,
            overrides={},
        )

    @classmethod
    def from_dict(cls, d: Mapping) -> "LaunchConfig":
        unknown = set(d) - _TOP_KEYS
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        schema = d.get("schema", SCHEMA_VERSION)
        if schema != SCHEMA_VERSION:
            raise ConfigError(f"unsupported config schema {schema!r} (expected {SCHEMA_VERSION})")
        if "threads" not in d:
            raise ConfigError("config must set 'threads'")
        overrides = {}
        for which in ("a", "b"):
            if which in d:
                ov = d[which]
                if not isinstance(ov, Mapping):
                    raise ConfigError(f"[{which}] must be a table")
                bad = set(ov) - _OVERRIDE_KEYS
                if bad:
                    raise ConfigError(f"unknown keys in [{which}]: {', '.join(sorted(bad))}")
                overrides[which] = dict(ov)
        return cls(
            threads=d["threads"],
            warp_size=d.get("warp_size", 32),
            params=dict(d.get("params", {})),
            inputs=_names(d, "inputs"),
            outputs=_names(d, "outputs"),
            overrides=overrides,
        )

    @classmethod
    def loads(cls, text: str) -> "LaunchConfig":
        try:
            data = tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"malformed config: {exc}") from None
        return cls.from_dict(data)

    @classmethod
    def load(cls, path: str | Path) -> "LaunchConfig":
        return cls.loads(Path(path).read_text(encoding="utf-8"))


def _names(d: Mapping, key: str) -> tuple[str, ...] | None:
    if key not in d:
        return None
    v = d[key]
    if not isinstance(v, list) or not all(isinstance(s, str) for s in v):
        raise ConfigError(f"{key} must be a list of array names")
    if len(set(v)) != len(v):
        raise ConfigError(f"duplicate names in {key}")
    return tuple(v)
