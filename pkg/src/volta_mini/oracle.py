"""Brute-force schedule oracles for small programs.

:func:`enumerate_schedules` explores every interleaving of the checked
dynamics; :func:`unchecked_races` applies the trace definition of a data race
(two conflicting accesses that occur back to back in both orders) to the
unchecked dynamics, independently of the memory-event bookkeeping.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

from .ir import Addr, Load, Program, Store, Sync
from .symexec import Machine, Outcome, Race, finish, releasable_syncs, release, step
from .symexpr import Expr


class EnumerationLimit(RuntimeError):
    pass


def enumerate_schedules(
    p: Program,
    init_shared: Mapping[Addr, Expr],
    limit: int = 100_000,
    *,
    init_regs: Sequence[Mapping[str, Expr]] | None = None,
) -> list[Outcome]:
    """All distinct outcomes of the checked dynamics, in discovery order.

    Every runnable thread's next statement and every releasable sync set is
    tried from every reachable state; states are memoized, so ``limit`` bounds
    the number of distinct states rather than schedules.
    """
    seen: set = set()
    outcomes: dict = {}
    stack = [Machine.initial(p, init_shared, init_regs)]
    while stack:
        m = stack.pop()
        key = m.state_key()
        if key in seen:
            continue
        seen.add(key)
        if len(seen) > limit:
            raise EnumerationLimit(f"more than {limit} distinct states")
        tids = m.runnable()
        syncs = releasable_syncs(m)
        if not tids and not syncs:
            o = finish(m)
            outcomes.setdefault(o.key(), o)
            continue
        succ = []
        for t in tids:
            m2 = m.copy()
            r = step(m2, t)
            if isinstance(r, Race):
                outcomes.setdefault(r.key(), r)
            else:
                succ.append(m2)
        for I in syncs:
            succ.append(release(m.copy(), I))
        stack.extend(reversed(succ))  # explore in move order
    return list(outcomes.values())


# ---------------------------------------------------------------------------
# race oracle over the unchecked dynamics
# ---------------------------------------------------------------------------


@dataclass(frozen=True, order=True)
class AccessSite:
    tid: int
    pc: int
    kind: str  # "read" | "write"


@dataclass(frozen=True, order=True)
class RacePair:
    addr: Addr
    a: AccessSite
    b: AccessSite


def _access(p: Program, tid: int, pc: int):
    s = p.threads[tid][pc]
    if isinstance(s, Load):
        return s.addr, "read"
    if isinstance(s, Store):
        return s.addr, "write"
    return None


def _moves(p: Program, pcs: tuple[int, ...]):
    """Successor pc-vectors: single steps (tagged with the thread) and sync releases."""
    n = p.n
    status = []
    for t in range(n):
        prog = p.threads[t]
        if pcs[t] >= len(prog):
            status.append(None)
        elif isinstance(prog[pcs[t]], Sync):
            status.append(prog[pcs[t]].tids)
        else:
            status.append("run")
    out = []
    for t in range(n):
        if status[t] == "run":
            nxt = list(pcs)
            nxt[t] += 1
            out.append((t, tuple(nxt)))
    done: set = set()
    for t in range(n):
        I = status[t]
        if not isinstance(I, frozenset) or I in done or t not in I:
            continue
        done.add(I)
        if all(status[i] is None or status[i] == I for i in I):
            nxt = list(pcs)
            for i in I:
                if status[i] == I:
                    nxt[i] += 1
            out.append((None, tuple(nxt)))
    return out


def unchecked_races(p: Program, limit: int = 1_000_000) -> list[RacePair]:
    """Conflicting access pairs that occur adjacently in both orders.

    Addresses and control flow are static, so reachability over pc-vectors
    is exact regardless of memory contents.
    """
    start = (0,) * p.n
    seen = {start}
    stack = [start]
    adjacent: set = set()
    while stack:
        pcs = stack.pop()
        for t, nxt in _moves(p, pcs):
            if nxt not in seen:
                seen.add(nxt)
                if len(seen) > limit:
                    raise EnumerationLimit(f"more than {limit} pc states")
                stack.append(nxt)
            if t is None:
                continue
            acc = _access(p, t, pcs[t])
            if acc is None:
                continue
            g, kind = acc
            for u, _ in _moves(p, nxt):
                if u is None or u == t:
                    continue
                acc2 = _access(p, u, nxt[u])
                if acc2 is None or acc2[0] != g or (kind == "read" and acc2[1] == "read"):
                    continue
                adjacent.add((g, AccessSite(t, pcs[t], kind), AccessSite(u, nxt[u], acc2[1])))
    races = set()
    for g, a, b in adjacent:
        if (g, b, a) in adjacent:
            races.add(RacePair(g, *sorted((a, b))))
    return sorted(races)


def has_unchecked_race(p: Program) -> bool:
    return bool(unchecked_races(p))


def reachable_deadlock(p: Program, limit: int = 1_000_000) -> bool:
    """True iff some unchecked schedule gets stuck before every thread returns."""
    start = (0,) * p.n
    seen = {start}
    stack = [start]
    ends = tuple(len(t) for t in p.threads)
    while stack:
        pcs = stack.pop()
        moves = _moves(p, pcs)
        if not moves and pcs != ends:
            return True
        for _, nxt in moves:
            if nxt not in seen:
                seen.add(nxt)
                if len(seen) > limit:
                    raise EnumerationLimit(f"more than {limit} pc states")
                stack.append(nxt)
    return False
