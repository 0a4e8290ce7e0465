"""Elaboration of a parsed kernel into per-thread straight-line programs.

Loops are unrolled, ``if`` conditions and array indices are folded to
integers for each ``tid``, and every construct whose outcome could depend on
tensor data is rejected with :class:`StructuredCtaError`.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping

from .. import symexpr as sx
from ..ir import (
    Addr,
    BinOp,
    Copy,
    Load,
    Program,
    SetConst,
    Store,
    Sync,
    UnOp,
)
from .config import LaunchConfig
from .parser import (
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

REASONS = (
    "data-dependent branch",
    "data-dependent address",
    "non-static loop bound",
    "recursion/unbounded construct",
    "out-of-range tid set",
)

DEFAULT_MAX_STMTS = 2**20


class StructuredCtaError(Exception):
    """The kernel is not a structured-CTA; ``reason`` is one of :data:`REASONS`."""

    def __init__(self, reason: str, loc: str, detail: str = ""):
        assert reason in REASONS, reason
        msg = f"{loc}: {reason}" + (f": {detail}" if detail else "")
        super().__init__(msg)
        self.reason = reason
        self.loc = loc
        self.detail = detail


class ElaborationError(ValueError):
    """A static-evaluation failure that is not a structured-CTA violation."""


def _loc(loc) -> str:
    return f"{loc[0]}:{loc[1]}"


# ---------------------------------------------------------------------------
# launch signature
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Launch:
    """Array sizes and roles of a kernel under a concrete config."""

    threads: int
    warp_size: int
    params: Mapping[str, int]
    sizes: Mapping[str, int]
    roles: Mapping[str, str]
    inputs: tuple[str, ...]
    outputs: tuple[str, ...]

    def signature(self) -> tuple:
        return (
            tuple((a, self.sizes[a]) for a in self.inputs),
            tuple((a, self.sizes[a]) for a in self.outputs),
        )


def resolve(ast: KernelAst, cfg: LaunchConfig) -> Launch:
    params: dict[str, int] = {}
    for p in ast.params:
        if p.name in cfg.params:
            params[p.name] = cfg.params[p.name]
        elif p.default is not None:
            params[p.name] = p.default
        else:
            raise ElaborationError(f"{_loc(p.loc)}: parameter {p.name!r} is not bound by the config")
    sizes: dict[str, int] = {}
    roles: dict[str, str] = {}
    for a in ast.arrays:
        env = _StaticEnv(params, cfg.threads, cfg.warp_size)
        size = env.eval(a.size, "non-static loop bound")
        if size < 1:
            raise ElaborationError(f"{_loc(a.loc)}: array {a.name!r} has non-positive size {size}")
        sizes[a.name] = size
        roles[a.name] = a.role
    for key in ("inputs", "outputs"):
        names = getattr(cfg, key)
        for n in names or ():
            if n not in sizes:
                raise ElaborationError(f"config {key} names undeclared array {n!r}")
    inputs = cfg.inputs if cfg.inputs is not None else tuple(a for a in sizes if roles[a] == "input")
    outputs = cfg.outputs if cfg.outputs is not None else tuple(a for a in sizes if roles[a] == "output")
    return Launch(cfg.threads, cfg.warp_size, params, sizes, roles, tuple(inputs), tuple(outputs))


# ---------------------------------------------------------------------------
# static integer evaluation
# ---------------------------------------------------------------------------


class _StaticEnv:
    def __init__(self, params: Mapping[str, int], n: int, w: int, tid: int | None = None):
        self.params = params
        self.n = n
        self.w = w
        self.tid = tid
        self.scopes: list[dict[str, tuple[str, object]]] = [{}]

    def lookup(self, name: str):
        for s in reversed(self.scopes):
            if name in s:
                return s[name]
        if name in self.params:
            return ("int", self.params[name])
        if name == "tid" and self.tid is not None:
            return ("int", self.tid)
        if name == "nthreads":
            return ("int", self.n)
        if name == "warpsize":
            return ("int", self.w)
        return None

    def assign_int(self, name: str, v: int) -> None:
        for s in reversed(self.scopes):
            if name in s:
                s[name] = ("int", v)
                return
        raise KeyError(name)

    def eval(self, e, reason: str) -> int:
        if isinstance(e, Num):
            if not e.is_int:
                raise ElaborationError(f"{_loc(e.loc)}: non-integer literal in an integer context")
            return int(e.value)
        if isinstance(e, Name):
            b = self.lookup(e.id)
            if b is None:
                raise ElaborationError(f"{_loc(e.loc)}: {e.id!r} is not available here")
            if b[0] != "int":
                raise StructuredCtaError(reason, _loc(e.loc), f"depends on register {e.id!r}")
            return b[1]
        if isinstance(e, Index):
            raise StructuredCtaError(reason, _loc(e.loc), f"depends on memory {e.array}[...]")
        if isinstance(e, (Call, Inf)):
            raise StructuredCtaError(reason, _loc(e.loc), "depends on a data value")
        if isinstance(e, Unary):
            v = self.eval(e.arg, reason)
            return -v if e.op == "-" else int(not v)
        if isinstance(e, Binary):
            op = e.op
            if op == "&&":
                return int(bool(self.eval(e.a, reason)) and bool(self.eval(e.b, reason)))
            if op == "||":
                return int(bool(self.eval(e.a, reason)) or bool(self.eval(e.b, reason)))
            a = self.eval(e.a, reason)
            b = self.eval(e.b, reason)
            if op == "+":
                return a + b
            if op == "-":
                return a - b
            if op == "*":
                return a * b
            if op in ("/", "%"):
                if b == 0:
                    raise ElaborationError(f"{_loc(e.loc)}: integer division by zero")
                q = abs(a) // abs(b) * (1 if (a >= 0) == (b > 0) else -1)  # C truncation
                return q if op == "/" else a - q * b
            return int(
                {"<": a < b, "<=": a <= b, ">": a > b, ">=": a >= b, "==": a == b, "!=": a != b}[op]
            )
        raise TypeError(e)  # pragma: no cover

    def is_static(self, e) -> bool:
        if isinstance(e, Num):
            return True
        if isinstance(e, Name):
            b = self.lookup(e.id)
            return b is not None and b[0] == "int"
        if isinstance(e, (Index, Call, Inf)):
            return False
        if isinstance(e, Unary):
            return self.is_static(e.arg)
        if isinstance(e, Binary):
            return self.is_static(e.a) and self.is_static(e.b)
        return False


def _const_value(env: _StaticEnv, e) -> Fraction | None:
    """Exact rational value of a data-context expression built from literals and ints."""
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Name):
        b = env.lookup(e.id)
        if b is not None and b[0] == "int":
            return Fraction(b[1])
        return None
    if isinstance(e, Unary) and e.op == "-":
        v = _const_value(env, e.arg)
        return None if v is None else -v
    if isinstance(e, Binary) and e.op in ("+", "-", "*", "/"):
        a = _const_value(env, e.a)
        if a is None:
            return None
        b = _const_value(env, e.b)
        if b is None:
            return None
        if e.op == "+":
            return a + b
        if e.op == "-":
            return a - b
        if e.op == "*":
            return a * b
        if b == 0:
            return None  # leave to runtime: reported as invalid arithmetic
        return a / b
    return None


# ---------------------------------------------------------------------------
# per-thread code generation
# ---------------------------------------------------------------------------


class _Return(Exception):
    pass


class _ThreadGen:
    def __init__(self, launch: Launch, tid: int, max_stmts: int):
        self.launch = launch
        self.tid = tid
        self.env = _StaticEnv(launch.params, launch.threads, launch.warp_size, tid)
        self.out: list = []
        self.max_stmts = max_stmts
        self.ntemp = 0
        self.site_names: dict[tuple, str] = {}
        self.used_names: set[str] = set()
        self.loop_iters = 0

    # helpers
    def emit(self, s) -> None:
        if len(self.out) >= self.max_stmts:
            raise StructuredCtaError(
                "recursion/unbounded construct",
                s.loc,
                f"thread {self.tid} exceeds {self.max_stmts} statements after unrolling",
            )
        self.out.append(s)

    def temp(self) -> str:
        t = f"%t{self.ntemp}"
        self.ntemp += 1
        return t

    def reg_name(self, name: str, loc) -> str:
        key = (name, loc)
        r = self.site_names.get(key)
        if r is None:
            r = name
            k = 2
            while r in self.used_names:
                r = f"{name}.{k}"
                k += 1
            self.used_names.add(r)
            self.site_names[key] = r
        return r

    def addr(self, ix: Index) -> Addr:
        off = self.env.eval(ix.index, "data-dependent address")
        return Addr(ix.array, off)

    # data expressions
    def gen(self, e, dst: str | None, loc: str) -> str:
        """Emit code computing ``e``; the result lands in ``dst`` when given."""
        c = _const_value(self.env, e)
        if c is not None:
            d = dst or self.temp()
            self.emit(SetConst(d, sx.const(c), loc))
            return d
        if isinstance(e, Unary) and e.op == "-" and isinstance(e.arg, Inf):
            d = dst or self.temp()
            self.emit(SetConst(d, sx.NEG_INF, loc))
            return d
        if isinstance(e, Inf):
            raise ElaborationError(f"{loc}: only negative infinity is representable")
        if isinstance(e, Name):
            b = self.env.lookup(e.id)
            reg = b[1]
            if dst is None or dst == reg:
                return reg
            self.emit(Copy(dst, reg, loc))
            return dst
        if isinstance(e, Index):
            d = dst or self.temp()
            self.emit(Load(d, self.addr(e), loc))
            return d
        if isinstance(e, Unary):
            if e.op != "-":
                raise ElaborationError(f"{_loc(e.loc)}: '!' is not a data operator")
            a = self.gen(e.arg, None, loc)
            d = dst or self.temp()
            self.emit(UnOp(d, "neg", a, loc))
            return d
        if isinstance(e, Binary):
            if e.op not in ("+", "-", "*", "/"):
                raise StructuredCtaError(
                    "data-dependent branch", _loc(e.loc), f"operator {e.op!r} applied to data"
                )
            a = self.gen(e.a, None, loc)
            b = self.gen(e.b, None, loc)
            if e.op == "-":
                nb = self.temp()
                self.emit(UnOp(nb, "neg", b, loc))
                b = nb
            op = {"+": "add", "-": "add", "*": "mul", "/": "div"}[e.op]
            d = dst or self.temp()
            self.emit(BinOp(d, op, a, b, loc))
            return d
        if isinstance(e, Call):
            fn = e.fn
            if fn in ("exp", "expf", "__expf"):
                a = self.gen(e.args[0], None, loc)
                d = dst or self.temp()
                self.emit(UnOp(d, "exp", a, loc))
                return d
            negate = fn in ("min", "fminf")  # min(a, b) = -max(-a, -b)
            regs = []
            for arg in e.args:
                r = self.gen(arg, None, loc)
                if negate:
                    nr = self.temp()
                    self.emit(UnOp(nr, "neg", r, loc))
                    r = nr
                regs.append(r)
            acc = regs[0]
            for i, r in enumerate(regs[1:], 1):
                last = i == len(regs) - 1
                d = dst if (last and dst and not negate) else self.temp()
                self.emit(BinOp(d, "max", acc, r, loc))
                acc = d
            if negate:
                d = dst or self.temp()
                self.emit(UnOp(d, "neg", acc, loc))
                acc = d
            return acc
        raise TypeError(e)  # pragma: no cover

    # statements
    def block(self, stmts) -> None:
        self.env.scopes.append({})
        try:
            for s in stmts:
                self.stmt(s)
        finally:
            self.env.scopes.pop()

    def stmt(self, s) -> None:
        loc = _loc(s.loc)
        if isinstance(s, VarDecl):
            if s.kind == "int":
                v = 0 if s.init is None else self.env.eval(s.init, "data-dependent address")
                self.env.scopes[-1][s.name] = ("int", v)
            else:
                r = self.reg_name(s.name, s.loc)
                if s.init is not None:
                    self.gen(s.init, r, loc)
                self.env.scopes[-1][s.name] = ("float", r)
        elif isinstance(s, Assign):
            self.assign(s, loc)
        elif isinstance(s, Block):
            self.block(s.stmts)
        elif isinstance(s, If):
            if self.env.eval(s.cond, "data-dependent branch"):
                self.block((s.then,))
            elif s.orelse is not None:
                self.block((s.orelse,))
        elif isinstance(s, For):
            self.for_loop(s)
        elif isinstance(s, SyncAll):
            self.emit(Sync(frozenset(range(self.launch.threads)), loc))
        elif isinstance(s, SyncWarp):
            self.emit(Sync(self.warp_set(s), loc))
        elif isinstance(s, Return):
            raise _Return()
        else:  # pragma: no cover
            raise TypeError(s)

    def assign(self, s: Assign, loc: str) -> None:
        value = s.value
        if s.op != "=":
            value = Binary(s.op[0], s.target, s.value, s.loc)
        t = s.target
        if isinstance(t, Name):
            b = self.env.lookup(t.id)
            if b[0] == "int":
                self.env.assign_int(t.id, self.env.eval(value, "data-dependent address"))
            else:
                self.gen(value, b[1], loc)
        else:
            g = self.addr(t)
            r = self.gen(value, None, loc)
            self.emit(Store(g, r, loc))

    def for_loop(self, s: For) -> None:
        env = self.env
        env.scopes.append({s.var: ("int", env.eval(s.start, "non-static loop bound"))})
        try:
            while env.eval(s.cond, "non-static loop bound"):
                self.loop_iters += 1
                if self.loop_iters > self.max_stmts:
                    raise StructuredCtaError(
                        "recursion/unbounded construct",
                        _loc(s.loc),
                        f"more than {self.max_stmts} loop iterations",
                    )
                self.block((s.body,))
                upd = s.update
                value = upd.value if upd.op == "=" else Binary(upd.op[0], upd.target, upd.value, upd.loc)
                env.assign_int(s.var, env.eval(value, "non-static loop bound"))
        finally:
            env.scopes.pop()

    def warp_set(self, s: SyncWarp) -> frozenset[int]:
        W, N = self.launch.warp_size, self.launch.threads
        loc = _loc(s.loc)
        ev = lambda e: self.env.eval(e, "data-dependent branch")  # noqa: E731
        if s.form == "own":
            w = self.tid // W
            I = frozenset(range(w * W, min(N, (w + 1) * W)))
        elif s.form in ("mask", "warp-mask"):
            if s.form == "mask":
                w, mask = self.tid // W, ev(s.args[0])
            else:
                w, mask = ev(s.args[0]), ev(s.args[1])
            if mask < 0 or mask >= 1 << W:
                raise StructuredCtaError("out-of-range tid set", loc, f"lane mask {mask:#x} exceeds warp size {W}")
            I = frozenset(w * W + l for l in range(W) if mask >> l & 1)
        elif s.form == "range":
            lo, hi = ev(s.args[0]), ev(s.args[1])
            I = frozenset(range(lo, hi + 1))
        else:
            I = frozenset(ev(a) for a in s.args)
        check_sync_set(I, N, W, loc)
        if self.tid not in I:
            raise StructuredCtaError(
                "out-of-range tid set", loc, f"thread {self.tid} is not a member of its sync set {sorted(I)}"
            )
        return I

    def run(self, body) -> tuple:
        try:
            self.block(body)
        except _Return:
            pass
        return tuple(self.out)


def check_sync_set(I: frozenset[int], n: int, w: int, loc: str) -> None:
    """A sync set must be non-empty, inside the launch, and be either all
    threads or contained in one warp window ``{k, ..., k+w-1}`` with ``k % w == 0``."""
    if not I:
        raise StructuredCtaError("out-of-range tid set", loc, "empty sync set")
    if min(I) < 0 or max(I) >= n:
        raise StructuredCtaError("out-of-range tid set", loc, f"{_fmt_set(I)} is not within 0..{n - 1}")
    if len(I) == n:
        return
    if min(I) // w != max(I) // w:
        raise StructuredCtaError("out-of-range tid set", loc, f"{_fmt_set(I)} spans a warp boundary (warp size {w})")


def _fmt_set(I) -> str:
    s = sorted(I)
    if len(s) > 2 and s == list(range(s[0], s[-1] + 1)):
        return f"{{{s[0]}..{s[-1]}}}"
    return "{" + ",".join(map(str, s)) + "}"


def elaborate(ast: KernelAst, cfg: LaunchConfig, *, max_stmts: int = DEFAULT_MAX_STMTS) -> Program:
    """Expand ``ast`` into one straight-line program per thread."""
    launch = resolve(ast, cfg)
    threads = tuple(
        _ThreadGen(launch, tid, max_stmts).run(ast.body) for tid in range(launch.threads)
    )
    p = Program(threads, dict(launch.sizes), launch.warp_size, ast.name)
    validate_structured(p, cfg)
    return p


def validate_structured(p: Program, cfg: LaunchConfig) -> None:
    """Re-check the structured-CTA invariants of an elaborated program."""
    if p.n != cfg.threads:
        raise StructuredCtaError(
            "out-of-range tid set", "program", f"program has {p.n} threads but the launch has {cfg.threads}"
        )
    for tid, prog in enumerate(p.threads):
        for k, s in enumerate(prog):
            loc = s.loc or f"thread {tid} stmt {k}"
            if isinstance(s, Sync):
                check_sync_set(s.tids, p.n, cfg.warp_size, loc)
            elif isinstance(s, (Load, Store)):
                g = s.addr
                if not isinstance(g.offset, int) or isinstance(g.offset, bool):
                    raise StructuredCtaError("data-dependent address", loc, f"address {g} is not concrete")
                if g.array not in p.arrays:
                    raise StructuredCtaError("data-dependent address", loc, f"unknown array {g.array!r}")
