"""Bundled example kernels, launch configs and the expected-verdict manifest."""

from __future__ import annotations

import sys
from dataclasses import dataclass
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

ROOT = Path(__file__).resolve().parent


@dataclass(frozen=True)
class Pair:
    name: str
    a: Path
    b: Path
    config: Path
    verdict: str
    outcome: str | None = None
    slow: bool = False


def path(name: str) -> Path:
    return ROOT / name


def pairs() -> list[Pair]:
    data = tomllib.loads((ROOT / "corpus.toml").read_text(encoding="utf-8"))
    return [
        Pair(
            d["name"], ROOT / d["a"], ROOT / d["b"], ROOT / d["config"],
            d["verdict"], d.get("outcome"), d.get("slow", False),
        )
        for d in data["pair"]
    ]


def pair(name: str) -> Pair:
    for p in pairs():
        if p.name == name:
            return p
    raise KeyError(name)
