"""Random small structured programs for property testing.

Programs use one shared array ``g`` whose every cell is initialized with a
fresh symbol, and every register is written before it is read, so the only
errors they can exhibit are races, deadlocks and invalid arithmetic.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from typing import Callable

from . import symexpr as sx
from .ir import Addr, BinOp, Copy, Load, Program, SetConst, Store, Sync, UnOp

Pick = Callable[[int, int], int]  # inclusive integer choice

CONSTS = (Fraction(1), Fraction(2), Fraction(-1), Fraction(1, 2), Fraction(3))
BIN = ("add", "add", "mul", "max", "div")
KINDS = ("const", "bin", "un", "copy", "load", "load", "store", "store", "sync", "sync")


@dataclass(frozen=True)
class GenConfig:
    max_threads: int = 3
    max_stmts: int = 6
    n_addrs: int = 3
    n_regs: int = 3
    warp_size: int = 2


def sync_choices(tid: int, n: int, w: int) -> list[frozenset[int]]:
    """Sync sets a thread may wait on: everyone, or a subset of its warp containing it."""
    everyone = frozenset(range(n))
    base = tid // w * w
    lanes = [t for t in range(base, min(n, base + w)) if t != tid]
    out = [everyone]
    for k in range(len(lanes) + 1):
        for extra in combinations(lanes, k):
            s = frozenset((tid, *extra))
            if s not in out:
                out.append(s)
    return out


def generate(pick: Pick, cfg: GenConfig = GenConfig()) -> Program:
    n = pick(1, cfg.max_threads)
    threads = []
    for tid in range(n):
        defined: list[str] = []
        prog = []
        for k in range(pick(0, cfg.max_stmts)):
            loc = f"t{tid}:{k}"
            kind = KINDS[pick(0, len(KINDS) - 1)]
            if not defined and kind in ("bin", "un", "copy", "store"):
                kind = "const" if kind in ("bin", "un") else "load"
            dst = f"r{pick(0, cfg.n_regs - 1)}"
            if kind == "const":
                prog.append(SetConst(dst, sx.const(CONSTS[pick(0, len(CONSTS) - 1)]), loc))
            elif kind == "bin":
                a = defined[pick(0, len(defined) - 1)]
                b = defined[pick(0, len(defined) - 1)]
                prog.append(BinOp(dst, BIN[pick(0, len(BIN) - 1)], a, b, loc))
            elif kind == "un":
                a = defined[pick(0, len(defined) - 1)]
                prog.append(UnOp(dst, ("neg", "exp")[pick(0, 1)], a, loc))
            elif kind == "copy":
                prog.append(Copy(dst, defined[pick(0, len(defined) - 1)], loc))
            elif kind == "load":
                prog.append(Load(dst, Addr("g", pick(0, cfg.n_addrs - 1)), loc))
            elif kind == "store":
                src = defined[pick(0, len(defined) - 1)]
                prog.append(Store(Addr("g", pick(0, cfg.n_addrs - 1)), src, loc))
                continue
            else:
                sets = sync_choices(tid, n, cfg.warp_size)
                prog.append(Sync(sets[pick(0, len(sets) - 1)], loc))
                continue
            if dst not in defined:
                defined.append(dst)
        threads.append(tuple(prog))
    return Program(tuple(threads), {"g": cfg.n_addrs}, cfg.warp_size, "random")


def initial_memory(p: Program) -> dict[Addr, sx.Expr]:
    return {Addr(a, i): sx.var(f"{a}_{i}") for a, size in p.arrays.items() for i in range(size)}


def random_program(rng: random.Random, cfg: GenConfig = GenConfig()) -> Program:
    return generate(rng.randint, cfg)


def programs(cfg: GenConfig = GenConfig()):
    """Hypothesis strategy producing random structured programs."""
    from hypothesis import strategies as st

    @st.composite
    def _programs(draw):
        return generate(lambda lo, hi: draw(st.integers(lo, hi)), cfg)

    return _programs()
