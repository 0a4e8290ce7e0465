"""Checked small-step execution of straight-line thread programs.

The machine tracks, per address, which threads have not synchronized with
each reader since its last read and with the last writer since its write.
A memory access that has not synchronized with a conflicting access is a data
race and stops the run.

Memory-safety violations (uninitialized reads, out-of-bounds accesses,
undefined arithmetic) do not stop the run: the offending value is poisoned,
the first violation is remembered, and it is reported once the run ends
without a race.  This keeps the race verdict independent of the schedule.
"""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence, Union

from . import symexpr as sx
from .ir import (
    Addr,
    BinOp,
    Copy,
    Load,
    Program,
    SetConst,
    Stmt,
    Store,
    Sync,
    UnOp,
)
from .symexpr import Expr


class _Undefined:
    """Poison value produced by an unsafe read."""

    __slots__ = ()

    def __repr__(self) -> str:
        return "<undefined>"


UNDEF = _Undefined()

NO_SYNC: frozenset[int] = frozenset()


# ---------------------------------------------------------------------------
# memory events
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AddrEvents:
    """Access history of one address.

    ``readers[i]`` holds the threads that have not synced with ``i`` since
    ``i`` last read the address; ``writer = (j, J)`` is the last writer and the
    threads not yet synced with it.  The ``*_loc`` fields are provenance for
    reports only and never influence the semantics.
    """

    readers: Mapping[int, frozenset[int]] = field(default_factory=dict)
    writer: tuple[int, frozenset[int]] = (0, NO_SYNC)
    read_locs: Mapping[int, str] = field(default_factory=dict)
    write_loc: str = ""

    def key(self):
        rd = tuple(sorted((i, tuple(sorted(s))) for i, s in self.readers.items() if s))
        return rd, (self.writer[0], tuple(sorted(self.writer[1])))


EMPTY_EVENTS = AddrEvents()

MemEvents = dict  # dict[Addr, AddrEvents]


def no_racing_rd(i: int, readers: Mapping[int, Iterable[int]]) -> bool:
    return all(i == j or i not in rd for j, rd in readers.items())


def no_racing_wr(i: int, writer: tuple[int, Iterable[int]]) -> bool:
    j, J = writer
    return i == j or i not in J


def sync_mem(I: frozenset[int], x: Mapping[Addr, AddrEvents]) -> MemEvents:
    """Forget every pending conflict between members of ``I``."""
    out: MemEvents = {}
    for g, ev in x.items():
        readers = {i: (rd - I if i in I else rd) for i, rd in ev.readers.items()}
        j, J = ev.writer
        writer = (j, J - I) if j in I else ev.writer
        out[g] = AddrEvents(readers, writer, ev.read_locs, ev.write_loc)
    return out


# ---------------------------------------------------------------------------
# outcomes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Access:
    tid: int
    kind: str  # "read" | "write"
    loc: str

    def as_dict(self) -> dict:
        return {"tid": self.tid, "kind": self.kind, "loc": self.loc}


@dataclass(frozen=True)
class RaceReport:
    addr: Addr
    first: Access  # the earlier access, recorded in the memory events
    second: Access  # the access that was about to execute
    step: int

    @property
    def kinds(self) -> tuple[str, str]:
        return (self.first.kind, self.second.kind)

    def as_dict(self) -> dict:
        return {
            "address": str(self.addr),
            "kinds": list(self.kinds),
            "first": self.first.as_dict(),
            "second": self.second.as_dict(),
            "step": self.step,
        }

    def __str__(self) -> str:
        return (
            f"data race on {self.addr}: {self.first.kind} by thread {self.first.tid} "
            f"({self.first.loc}) vs {self.second.kind} by thread {self.second.tid} "
            f"({self.second.loc}) at step {self.step}"
        )


@dataclass(frozen=True)
class DeadlockReport:
    status: tuple[str, ...]  # per thread: "returned" | "sync {..}" | "runnable"
    conflict: tuple | None = None  # (i1, I1, i2, I2) when two threads wait on clashing sets

    def as_dict(self) -> dict:
        d: dict = {"threads": list(self.status)}
        if self.conflict is not None:
            i1, I1, i2, I2 = self.conflict
            d["conflict"] = {
                "tid_a": i1,
                "set_a": sorted(I1),
                "tid_b": i2,
                "set_b": sorted(I2),
            }
        return d

    def __str__(self) -> str:
        if self.conflict is not None:
            i1, I1, i2, I2 = self.conflict
            return (
                f"deadlock: thread {i1} waits on {sorted(I1)} while thread {i2} waits on {sorted(I2)}"
            )
        return "deadlock: " + ", ".join(f"t{i}={s}" for i, s in enumerate(self.status))


SAFETY_KINDS = (
    "uninitialized-register-read",
    "uninitialized-memory-read",
    "out-of-bounds",
    "invalid-arithmetic",
)


@dataclass(frozen=True)
class SafetyReport:
    kind: str
    tid: int
    loc: str
    target: str  # address or register name
    detail: str = ""

    def as_dict(self) -> dict:
        d = {"kind": self.kind, "tid": self.tid, "loc": self.loc, "target": self.target}
        if self.detail:
            d["detail"] = self.detail
        return d

    def __str__(self) -> str:
        s = f"{self.kind}: thread {self.tid} at {self.loc}: {self.target}"
        return s + (f" ({self.detail})" if self.detail else "")


@dataclass(frozen=True)
class Final:
    shared: dict
    regs: tuple
    trace: tuple = ()
    kind = "final"

    def key(self):
        return ("final", frozenset(self.shared.items()), tuple(frozenset(r.items()) for r in self.regs))


@dataclass(frozen=True)
class Race:
    report: RaceReport
    trace: tuple = ()
    kind = "race"

    def key(self):
        return ("race", self.report.addr, self.report.first, self.report.second)


@dataclass(frozen=True)
class Deadlock:
    report: DeadlockReport
    trace: tuple = ()
    kind = "deadlock"

    def key(self):
        return ("deadlock", self.report.status)


@dataclass(frozen=True)
class Safety:
    report: SafetyReport
    trace: tuple = ()
    kind = "safety"

    def key(self):
        return ("safety", self.report)


Outcome = Union[Final, Race, Deadlock, Safety]


# ---------------------------------------------------------------------------
# machine
# ---------------------------------------------------------------------------


RUNNABLE = "runnable"
BLOCKED = "blocked"
RETURNED = "returned"


class ScheduleError(ValueError):
    pass


@dataclass
class Machine:
    program: Program
    mem_events: MemEvents
    shared: dict
    regs: list
    pcs: list
    steps: int = 0
    safety: SafetyReport | None = None
    trace: list = field(default_factory=list)
    checked: bool = True

    @classmethod
    def initial(
        cls,
        program: Program,
        init_shared: Mapping[Addr, Expr],
        init_regs: Sequence[Mapping[str, Expr]] | None = None,
        checked: bool = True,
    ) -> "Machine":
        regs = [dict(r) for r in init_regs] if init_regs is not None else [{} for _ in program.threads]
        return cls(program, {}, dict(init_shared), regs, [0] * program.n, checked=checked)

    def copy(self) -> "Machine":
        return Machine(
            self.program,
            dict(self.mem_events),
            dict(self.shared),
            [dict(r) for r in self.regs],
            list(self.pcs),
            self.steps,
            self.safety,
            list(self.trace),
            self.checked,
        )

    def status(self, tid: int) -> str:
        prog = self.program.threads[tid]
        pc = self.pcs[tid]
        if pc >= len(prog):
            return RETURNED
        if isinstance(prog[pc], Sync):
            return BLOCKED
        return RUNNABLE

    def waiting_on(self, tid: int) -> frozenset[int] | None:
        prog = self.program.threads[tid]
        pc = self.pcs[tid]
        if pc < len(prog) and isinstance(prog[pc], Sync):
            return prog[pc].tids
        return None

    def runnable(self) -> list[int]:
        return [t for t in range(self.program.n) if self.status(t) == RUNNABLE]

    def all_returned(self) -> bool:
        return all(self.status(t) == RETURNED for t in range(self.program.n))

    def state_key(self):
        mem = frozenset(
            (g, v if v is not UNDEF else None) for g, v in self.shared.items()
        )
        regs = tuple(
            frozenset((k, v if v is not UNDEF else None) for k, v in r.items()) for r in self.regs
        )
        ev = tuple(
            sorted(
                ((g, e.key()) for g, e in self.mem_events.items() if e.key() != ((), (0, ()))),
                key=repr,
            )
        )
        return (tuple(self.pcs), mem, regs, ev, self.safety)

    def note_safety(self, kind: str, tid: int, loc: str, target: str, detail: str = "") -> None:
        if self.safety is None:
            self.safety = SafetyReport(kind, tid, loc, target, detail)


def _read_reg(m: Machine, tid: int, name: str, loc: str):
    regs = m.regs[tid]
    if name not in regs:
        m.note_safety("uninitialized-register-read", tid, loc, name)
        return UNDEF
    return regs[name]


def _in_bounds(m: Machine, g: Addr) -> bool:
    size = m.program.arrays.get(g.array)
    return size is not None and 0 <= g.offset < size


def _apply_bin(op: str, a: Expr, b: Expr) -> Expr:
    if op == "add":
        e = sx.add(a, b)
    elif op == "mul":
        e = sx.mul(a, b)
    elif op == "div":
        e = sx.div(a, b)
    else:
        e = sx.maximum(a, b)
    return sx.canonicalize(e)


def _apply_un(op: str, a: Expr) -> Expr:
    e = sx.neg(a) if op == "neg" else sx.exp(a)
    return sx.canonicalize(e)


def step(m: Machine, tid: int) -> Machine | Race:
    """Execute the next statement of ``tid`` in place.

    Returns the machine, or a :class:`Race` outcome when the access conflicts
    with an unsynchronized earlier access.
    """
    if m.status(tid) != RUNNABLE:
        raise ScheduleError(f"thread {tid} is not runnable ({m.status(tid)})")
    s: Stmt = m.program.threads[tid][m.pcs[tid]]
    loc = s.loc or f"t{tid}:{m.pcs[tid]}"
    regs = m.regs[tid]
    if isinstance(s, SetConst):
        regs[s.dst] = s.value
    elif isinstance(s, Copy):
        regs[s.dst] = _read_reg(m, tid, s.src, loc)
    elif isinstance(s, (BinOp, UnOp)):
        if isinstance(s, BinOp):
            args = (_read_reg(m, tid, s.a, loc), _read_reg(m, tid, s.b, loc))
        else:
            args = (_read_reg(m, tid, s.a, loc),)
        if any(a is UNDEF for a in args):
            regs[s.dst] = UNDEF
        else:
            try:
                regs[s.dst] = _apply_bin(s.op, *args) if isinstance(s, BinOp) else _apply_un(s.op, *args)
            except sx.ExprError as exc:
                m.note_safety("invalid-arithmetic", tid, loc, s.dst, str(exc))
                regs[s.dst] = UNDEF
    elif isinstance(s, Load):
        g = s.addr
        if not _in_bounds(m, g):
            m.note_safety("out-of-bounds", tid, loc, str(g))
            regs[s.dst] = UNDEF
        else:
            ev = m.mem_events.get(g, EMPTY_EVENTS)
            if m.checked and not no_racing_wr(tid, ev.writer):
                j = ev.writer[0]
                return Race(
                    RaceReport(g, Access(j, "write", ev.write_loc), Access(tid, "read", loc), m.steps),
                    tuple(m.trace),
                )
            if m.checked:
                readers = dict(ev.readers)
                readers[tid] = m.program.all_tids
                read_locs = dict(ev.read_locs)
                read_locs[tid] = loc
                m.mem_events[g] = AddrEvents(readers, ev.writer, read_locs, ev.write_loc)
            if g in m.shared:
                regs[s.dst] = m.shared[g]
            else:
                m.note_safety("uninitialized-memory-read", tid, loc, str(g))
                regs[s.dst] = UNDEF
    elif isinstance(s, Store):
        g = s.addr
        val = _read_reg(m, tid, s.src, loc)
        if not _in_bounds(m, g):
            m.note_safety("out-of-bounds", tid, loc, str(g))
        else:
            ev = m.mem_events.get(g, EMPTY_EVENTS)
            if m.checked:
                for j in sorted(ev.readers):
                    if j != tid and tid in ev.readers[j]:
                        return Race(
                            RaceReport(
                                g,
                                Access(j, "read", ev.read_locs.get(j, "")),
                                Access(tid, "write", loc),
                                m.steps,
                            ),
                            tuple(m.trace),
                        )
                if not no_racing_wr(tid, ev.writer):
                    j = ev.writer[0]
                    return Race(
                        RaceReport(g, Access(j, "write", ev.write_loc), Access(tid, "write", loc), m.steps),
                        tuple(m.trace),
                    )
                m.mem_events[g] = AddrEvents(ev.readers, (tid, m.program.all_tids), ev.read_locs, loc)
            m.shared[g] = val
    else:  # pragma: no cover
        raise TypeError(f"unexpected statement {s!r}")
    m.pcs[tid] += 1
    m.steps += 1
    m.trace.append(str(tid))
    return m


def releasable_syncs(m: Machine) -> list[frozenset[int]]:
    """Sync sets whose members are all waiting on that set or returned."""
    cands: dict[frozenset[int], None] = {}
    for t in range(m.program.n):
        I = m.waiting_on(t)
        if I is None or I in cands or t not in I:
            continue
        ok = True
        for i in I:
            st = m.status(i)
            if st == RETURNED:
                continue
            if st != BLOCKED or m.waiting_on(i) != I:
                ok = False
                break
        if ok:
            cands[I] = None
    return sorted(cands, key=lambda s: (min(s), sorted(s)))


def release(m: Machine, I: frozenset[int]) -> Machine:
    for i in I:
        if m.waiting_on(i) == I:
            m.pcs[i] += 1
    if m.checked:
        m.mem_events = sync_mem(I, m.mem_events)
    m.steps += 1
    m.trace.append("SYNC " + ",".join(map(str, sorted(I))))
    return m


def try_release_sync(m: Machine) -> Machine | None:
    """Release one ready sync set (smallest minimum tid first), or return None."""
    cands = releasable_syncs(m)
    if not cands:
        return None
    return release(m, cands[0])


def _status_str(m: Machine, t: int) -> str:
    st = m.status(t)
    if st == BLOCKED:
        return "sync {" + ",".join(map(str, sorted(m.waiting_on(t)))) + "}"
    return st


def deadlock_report(m: Machine) -> DeadlockReport:
    status = tuple(_status_str(m, t) for t in range(m.program.n))
    blocked = [t for t in range(m.program.n) if m.status(t) == BLOCKED]
    conflict = None
    for a in blocked:
        for b in blocked:
            if a < b:
                I1, I2 = m.waiting_on(a), m.waiting_on(b)
                if I1 != I2 and a in I1 & I2 and b in I1 & I2:
                    conflict = (a, I1, b, I2)
                    break
        if conflict:
            break
    if conflict is None:
        for a in blocked:
            I1 = m.waiting_on(a)
            for b in sorted(I1):
                I2 = m.waiting_on(b)
                if b != a and I2 is not None and I2 != I1:
                    conflict = (a, I1, b, I2)
                    break
            if conflict:
                break
    return DeadlockReport(status, conflict)


def finish(m: Machine) -> Outcome:
    """Outcome of a machine on which no further step is possible."""
    if m.safety is not None:
        return Safety(m.safety, tuple(m.trace))
    if not m.all_returned():
        return Deadlock(deadlock_report(m), tuple(m.trace))
    return Final(dict(m.shared), tuple(dict(r) for r in m.regs), tuple(m.trace))


# ---------------------------------------------------------------------------
# scheduling
# ---------------------------------------------------------------------------


def parse_trace(text: str) -> list:
    """Parse a replay trace: one tid or ``SYNC <tid,tid,...>`` per line."""
    out: list = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.upper().startswith("SYNC"):
            body = line[4:].strip().strip("{}")
            try:
                out.append(frozenset(int(t) for t in body.replace(",", " ").split()))
            except ValueError:
                raise ScheduleError(f"trace line {lineno}: bad sync set {raw!r}") from None
        else:
            try:
                out.append(int(line))
            except ValueError:
                raise ScheduleError(f"trace line {lineno}: expected a thread id, got {raw!r}") from None
    return out


def format_trace(trace: Iterable[str]) -> str:
    return "".join(f"{t}\n" for t in trace)


def _run_round_robin(m: Machine) -> Outcome:
    queue = deque(range(m.program.n))
    while True:
        progressed = False
        for _ in range(len(queue)):
            tid = queue.popleft()
            queue.append(tid)
            while m.status(tid) == RUNNABLE:
                r = step(m, tid)
                if isinstance(r, Race):
                    return r
                progressed = True
            while try_release_sync(m) is not None:
                progressed = True
        if not progressed:
            return finish(m)


def _run_random(m: Machine, seed: int) -> Outcome:
    rng = random.Random(seed)
    while True:
        moves: list = list(m.runnable())
        moves.extend(releasable_syncs(m))
        if not moves:
            return finish(m)
        mv = moves[rng.randrange(len(moves))]
        if isinstance(mv, int):
            r = step(m, mv)
            if isinstance(r, Race):
                return r
        else:
            release(m, mv)


def _run_trace(m: Machine, trace: Sequence) -> Outcome:
    for i, mv in enumerate(trace):
        if isinstance(mv, frozenset):
            if mv not in releasable_syncs(m):
                raise ScheduleError(f"trace entry {i}: sync {sorted(mv)} is not releasable")
            release(m, mv)
        else:
            if not 0 <= mv < m.program.n or m.status(mv) != RUNNABLE:
                raise ScheduleError(f"trace entry {i}: thread {mv} is not runnable")
            r = step(m, mv)
            if isinstance(r, Race):
                return r
    return _run_round_robin(m)


def run(
    p: Program,
    init_shared: Mapping[Addr, Expr],
    schedule: str | Sequence = "round-robin",
    *,
    init_regs: Sequence[Mapping[str, Expr]] | None = None,
    checked: bool = True,
) -> Outcome:
    """Run ``p`` to an outcome.

    ``schedule`` is ``"round-robin"`` (each thread runs until it blocks),
    ``"random:SEED"`` (one statement or one sync release per step, chosen
    uniformly), or an explicit trace (a list of tids and frozenset sync sets,
    as returned by :func:`parse_trace`); after the trace is consumed the run
    continues round-robin.  ``checked=False`` disables race detection and
    gives the plain dynamics.
    """
    m = Machine.initial(p, init_shared, init_regs, checked=checked)
    if isinstance(schedule, str):
        if schedule == "round-robin":
            return _run_round_robin(m)
        if schedule.startswith("random:"):
            return _run_random(m, int(schedule.split(":", 1)[1]))
        if schedule.startswith("random"):
            return _run_random(m, 0)
        raise ScheduleError(f"unknown schedule policy {schedule!r}")
    return _run_trace(m, schedule)
