"""Concrete reference interpreter for kernel ASTs.

This walks the surface syntax directly (no elaboration), with real
arithmetic in mpmath at a fixed working precision.  It is the independent
oracle the tests use for two claims: elaboration preserves meaning, and a
numeric witness for a non-equal verification condition really does make the
two kernels produce different outputs.

With ``exact=True`` data values are :class:`~fractions.Fraction` and
``exp`` is rejected, so rational-valued kernels can be compared exactly.

Threads run as generators that pause at each barrier.  A barrier over a set
``I`` releases once every member of ``I`` waits on ``I``.  The interpreter
does not look for races; callers use it on race-free kernels, where any
schedule produces the same result.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping

import math

import mpmath

from .frontend import LaunchConfig
from .frontend.parser import (
    Assign,
    Binary,
    Block,
    Call,
    For,
    If,
    Index,
    Inf,
    KernelAst,
    Name,
    Num,
    Return,
    SyncAll,
    SyncWarp,
    Unary,
    VarDecl,
)
from .ir import Addr

DPS = 60


class InterpError(Exception):
    """The kernel hit a runtime error (bad access, division by zero, deadlock)."""

    def __init__(self, kind: str, detail: str):
        super().__init__(f"{kind}: {detail}")
        self.kind = kind


@dataclass
class _Var:
    kind: str  # 'int' | 'float'
    value: object


def _trunc_div(a: int, b: int) -> int:
    q = abs(a) // abs(b)
    return q if (a >= 0) == (b > 0) else -q


def _is_inf(v) -> bool:
    return isinstance(v, float) and math.isinf(v) or isinstance(v, mpmath.mpf) and mpmath.isinf(v)


def _is_nan(v) -> bool:
    return isinstance(v, float) and math.isnan(v) or isinstance(v, mpmath.mpf) and mpmath.isnan(v)


class _Thread:
    def __init__(self, ast: KernelAst, tid: int, n: int, w: int, params, sizes, mem, exact: bool = False):
        self.ast, self.tid, self.n, self.w, self.exact = ast, tid, n, w, exact
        self.params, self.sizes, self.mem = params, sizes, mem
        self.scopes: list[dict[str, _Var]] = [{}]

    def lookup(self, name: str) -> _Var:
        for s in reversed(self.scopes):
            if name in s:
                return s[name]
        if name in self.params:
            return _Var("int", self.params[name])
        builtin = {"tid": self.tid, "nthreads": self.n, "warpsize": self.w}
        if name in builtin:
            return _Var("int", builtin[name])
        raise InterpError("name", f"unknown identifier {name!r}")

    # expressions -----------------------------------------------------------
    def ival(self, e) -> int:
        """Integer (C semantics) value of ``e``."""
        if isinstance(e, Num):
            return int(e.value)
        if isinstance(e, Name):
            v = self.lookup(e.id)
            if v.kind != "int":
                raise InterpError("type", f"{e.id!r} used as an integer")
            return v.value
        if isinstance(e, Unary):
            a = self.ival(e.arg)
            return -a if e.op == "-" else int(not a)
        if isinstance(e, Binary):
            if e.op == "&&":
                return int(bool(self.ival(e.a)) and bool(self.ival(e.b)))
            if e.op == "||":
                return int(bool(self.ival(e.a)) or bool(self.ival(e.b)))
            a, b = self.ival(e.a), self.ival(e.b)
            if e.op in ("/", "%") and b == 0:
                raise InterpError("invalid-arithmetic", "integer division by zero")
            ops = {
                "+": lambda: a + b,
                "-": lambda: a - b,
                "*": lambda: a * b,
                "/": lambda: _trunc_div(a, b),
                "%": lambda: a - _trunc_div(a, b) * b,
                "<": lambda: int(a < b),
                "<=": lambda: int(a <= b),
                ">": lambda: int(a > b),
                ">=": lambda: int(a >= b),
                "==": lambda: int(a == b),
                "!=": lambda: int(a != b),
            }
            return ops[e.op]()
        raise InterpError("type", f"{type(e).__name__} in an integer context")

    def addr(self, ix: Index) -> Addr:
        off = self.ival(ix.index)
        if not 0 <= off < self.sizes[ix.array]:
            raise InterpError("out-of-bounds", f"{ix.array}[{off}]")
        return Addr(ix.array, off)

    def fval(self, e):
        """Real value of ``e`` in a data context."""
        if isinstance(e, Num):
            return self.num(e.value)
        if isinstance(e, Inf):
            return math.inf if self.exact else mpmath.inf
        if isinstance(e, Name):
            v = self.lookup(e.id)
            return self.num(v.value) if v.kind == "int" else v.value
        if isinstance(e, Index):
            g = self.addr(e)
            if g not in self.mem:
                raise InterpError("uninitialized-memory-read", str(g))
            return self.mem[g]
        if isinstance(e, Unary):
            return -self.fval(e.arg)
        if isinstance(e, Binary):
            a, b = self.fval(e.a), self.fval(e.b)
            if e.op == "+":
                r = a + b
            elif e.op == "-":
                r = a - b
            elif e.op == "*":
                r = a * b
            elif e.op == "/":
                if b == 0 or _is_inf(b):
                    raise InterpError("invalid-arithmetic", "division by zero or infinity")
                r = a / b
            else:
                raise InterpError("type", f"operator {e.op!r} on data")
            if _is_nan(r):
                raise InterpError("invalid-arithmetic", "undefined result")
            return r
        if isinstance(e, Call):
            args = [self.fval(a) for a in e.args]
            if e.fn in ("exp", "expf", "__expf"):
                if self.exact:
                    raise InterpError("inexact", "exp has no exact rational value")
                return mpmath.exp(args[0])
            if e.fn in ("max", "fmaxf"):
                return max(args)
            return min(args)
        raise InterpError("type", type(e).__name__)

    def num(self, q):
        q = Fraction(q)
        return q if self.exact else mpmath.mpf(q.numerator) / q.denominator

    # statements ------------------------------------------------------------
    def run(self):
        try:
            yield from self.block(self.ast.body)
        except _Ret:
            pass

    def block(self, stmts):
        self.scopes.append({})
        try:
            for s in stmts:
                yield from self.stmt(s)
        finally:
            self.scopes.pop()

    def stmt(self, s):
        if isinstance(s, VarDecl):
            if s.kind == "int":
                v = 0 if s.init is None else self.ival(s.init)
            else:
                v = self.num(0) if s.init is None else self.fval(s.init)
            self.scopes[-1][s.name] = _Var(s.kind, v)
        elif isinstance(s, Assign):
            self.assign(s)
        elif isinstance(s, Block):
            yield from self.block(s.stmts)
        elif isinstance(s, If):
            if self.ival(s.cond):
                yield from self.block((s.then,))
            elif s.orelse is not None:
                yield from self.block((s.orelse,))
        elif isinstance(s, For):
            self.scopes.append({s.var: _Var("int", self.ival(s.start))})
            try:
                while self.ival(s.cond):
                    yield from self.block((s.body,))
                    self.assign(s.update)
            finally:
                self.scopes.pop()
        elif isinstance(s, SyncAll):
            yield frozenset(range(self.n))
        elif isinstance(s, SyncWarp):
            yield self.warp_set(s)
        elif isinstance(s, Return):
            raise _Ret()

    def assign(self, s: Assign) -> None:
        value = s.value if s.op == "=" else Binary(s.op[0], s.target, s.value, s.loc)
        t = s.target
        if isinstance(t, Name):
            var = None
            for sc in reversed(self.scopes):
                if t.id in sc:
                    var = sc[t.id]
                    break
            if var is None:
                raise InterpError("name", f"cannot assign {t.id!r}")
            var.value = self.ival(value) if var.kind == "int" else self.fval(value)
        else:
            g = self.addr(t)
            self.mem[g] = self.fval(value)

    def warp_set(self, s: SyncWarp) -> frozenset[int]:
        W = self.w
        if s.form == "own":
            base = self.tid // W * W
            return frozenset(range(base, min(self.n, base + W)))
        if s.form == "mask":
            base, mask = self.tid // W * W, self.ival(s.args[0])
        elif s.form == "warp-mask":
            base, mask = self.ival(s.args[0]) * W, self.ival(s.args[1])
        elif s.form == "range":
            return frozenset(range(self.ival(s.args[0]), self.ival(s.args[1]) + 1))
        else:
            return frozenset(self.ival(a) for a in s.args)
        return frozenset(base + lane for lane in range(W) if mask >> lane & 1)


class _Ret(Exception):
    pass


def interpret(
    ast: KernelAst,
    cfg: LaunchConfig,
    inputs: Mapping[Addr, object],
    *,
    dps: int = DPS,
    exact: bool = False,
) -> dict[Addr, object]:
    """Run ``ast`` concretely and return the final contents of its output arrays.

    ``inputs`` maps input elements to numbers (Fractions, ints, floats or
    mpf values; only Fractions and ints when ``exact``).
    """
    params = {p.name: cfg.params.get(p.name, p.default) for p in ast.params}
    n, w = cfg.threads, cfg.warp_size
    with mpmath.workdps(dps):
        probe = _Thread(ast, 0, n, w, params, {}, {}, exact)
        sizes = {a.name: probe.ival(a.size) for a in ast.arrays}
        mem: dict[Addr, object] = {}
        for g, v in inputs.items():
            mem[g] = probe.num(v) if isinstance(v, (Fraction, int)) else mpmath.mpf(v)
        threads = [_Thread(ast, t, n, w, params, sizes, mem, exact).run() for t in range(n)]
        waiting: dict[int, frozenset[int]] = {}
        live = set(range(n))

        def advance(t: int) -> None:
            try:
                waiting[t] = next(threads[t])
            except StopIteration:
                live.discard(t)

        for t in range(n):
            advance(t)
        while live:
            released = False
            for I in sorted(set(waiting.values()), key=lambda s: (min(s), sorted(s))):
                if all(waiting.get(u) == I for u in I):
                    for u in sorted(I):
                        del waiting[u]
                    for u in sorted(I):
                        advance(u)
                    released = True
                    break
            if not released:
                raise InterpError("deadlock", f"threads {sorted(live)} blocked")
        outputs = {a.name for a in ast.arrays if a.role == "output"}
        return {g: v if exact else +v for g, v in sorted(mem.items(), key=lambda kv: (kv[0].array, kv[0].offset)) if g.array in outputs}
