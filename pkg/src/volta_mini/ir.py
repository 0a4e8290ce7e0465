"""Straight-line per-thread programs and the shared data model."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import Mapping, NamedTuple, Union

from .symexpr import Expr


class Addr(NamedTuple):
    array: str
    offset: int

    def __str__(self) -> str:
        return f"{self.array}[{self.offset}]"


BIN_OPS = ("add", "mul", "div", "max")
UN_OPS = ("neg", "exp")


@dataclass(frozen=True)
class SetConst:
    dst: str
    value: Expr
    loc: str = ""


@dataclass(frozen=True)
class BinOp:
    dst: str
    op: str
    a: str
    b: str
    loc: str = ""

    def __post_init__(self):
        if self.op not in BIN_OPS:
            raise ValueError(f"unknown binary op {self.op!r}")


@dataclass(frozen=True)
class UnOp:
    dst: str
    op: str
    a: str
    loc: str = ""

    def __post_init__(self):
        if self.op not in UN_OPS:
            raise ValueError(f"unknown unary op {self.op!r}")


@dataclass(frozen=True)
class Copy:
    dst: str
    src: str
    loc: str = ""


@dataclass(frozen=True)
class Load:
    dst: str
    addr: Addr
    loc: str = ""


@dataclass(frozen=True)
class Store:
    addr: Addr
    src: str
    loc: str = ""


@dataclass(frozen=True)
class Sync:
    tids: frozenset[int]
    loc: str = ""


Stmt = Union[SetConst, BinOp, UnOp, Copy, Load, Store, Sync]
ThreadProg = tuple  # tuple[Stmt, ...]; the implicit tail is `return`

SharedMem = dict  # dict[Addr, Expr]; absent key = uninitialized
RegFiles = list  # list[dict[str, Expr]] indexed by tid


@dataclass(frozen=True)
class Program:
    """A launch of ``len(threads)`` straight-line threads over declared arrays."""

    threads: tuple[ThreadProg, ...]
    arrays: Mapping[str, int] = field(default_factory=dict)
    warp_size: int = 32
    name: str = ""

    @property
    def n(self) -> int:
        return len(self.threads)

    @property
    def all_tids(self) -> frozenset[int]:
        return frozenset(range(len(self.threads)))

    def __hash__(self) -> int:
        return hash((self.threads, self.warp_size, self.name))


def stmt_str(s: Stmt) -> str:
    if isinstance(s, SetConst):
        return f"{s.dst} := {s.value}"
    if isinstance(s, BinOp):
        return f"{s.dst} := {s.op} {s.a} {s.b}"
    if isinstance(s, UnOp):
        return f"{s.dst} := {s.op} {s.a}"
    if isinstance(s, Copy):
        return f"{s.dst} := {s.src}"
    if isinstance(s, Load):
        return f"{s.dst} := *{s.addr}"
    if isinstance(s, Store):
        return f"*{s.addr} := {s.src}"
    if isinstance(s, Sync):
        return "sync {" + ",".join(map(str, sorted(s.tids))) + "}"
    raise TypeError(s)


class ThreadView(Sequence):
    """Residual program of one thread: a window onto the shared statement tuple."""

    __slots__ = ("_prog", "_pc")

    def __init__(self, prog: ThreadProg, pc: int):
        self._prog = prog
        self._pc = pc

    def __len__(self) -> int:
        return len(self._prog) - self._pc

    def __getitem__(self, i):
        if isinstance(i, slice):
            return self._prog[self._pc :][i]
        if i < 0:
            i += len(self)
        if not 0 <= i < len(self):
            raise IndexError(i)
        return self._prog[self._pc + i]

    @property
    def is_return(self) -> bool:
        return self._pc == len(self._prog)

    def __eq__(self, other) -> bool:
        if isinstance(other, ThreadView):
            return tuple(self) == tuple(other)
        return NotImplemented

    def __repr__(self) -> str:
        return "ThreadView([" + "; ".join(stmt_str(s) for s in self) + "; return])"


def thread_pc_view(p: Program, pcs: Mapping[int, int]) -> dict[int, ThreadView]:
    out = {}
    for tid, pc in pcs.items():
        if not 0 <= tid < p.n:
            raise IndexError(f"no thread {tid}")
        prog = p.threads[tid]
        if not 0 <= pc <= len(prog):
            raise IndexError(f"pc {pc} out of range for thread {tid} (length {len(prog)})")
        out[tid] = ThreadView(prog, pc)
    return out


class ProgramError(ValueError):
    pass


def check_program(p: Program) -> None:
    """Validate the core invariants: N >= 1, concrete addresses, sync sets inside the launch.

    Offsets outside an array are legal here; they are reported at run time.
    """
    if p.n < 1:
        raise ProgramError("a program needs at least one thread")
    everyone = p.all_tids
    for tid, prog in enumerate(p.threads):
        for s in prog:
            if isinstance(s, Sync):
                if not s.tids:
                    raise ProgramError(f"thread {tid}: empty sync set")
                if not s.tids <= everyone:
                    raise ProgramError(f"thread {tid}: sync set {sorted(s.tids)} exceeds launch of {p.n}")
            elif isinstance(s, (Load, Store)):
                if not isinstance(s.addr.offset, int):
                    raise ProgramError(f"thread {tid}: non-concrete address {s.addr}")
            elif not isinstance(s, (SetConst, BinOp, UnOp, Copy)):
                raise ProgramError(f"thread {tid}: unknown statement {s!r}")
