"""Symbolic real-valued terms.

Every value produced by the symbolic executor and consumed by the decision
procedure is an :class:`Expr`.  Nodes are hash-consed: two structurally equal
terms are the same Python object, so ``==`` is identity and sharing is free.

Smart constructors (:func:`add`, :func:`mul`, ...) apply only cheap local
normalization.  :func:`canonicalize` additionally distributes products over
sums, collects like monomials, merges exponentials and rewrites negation.
"""

from __future__ import annotations

import contextlib
import sys
import threading
import weakref
from fractions import Fraction
from typing import Iterable, Iterator, Mapping, Union

VAR = "VAR"
CONST = "CONST"
ADD = "ADD"
MUL = "MUL"
NEG = "NEG"
DIV = "DIV"
EXP = "EXP"
MAX = "MAX"
NEGINF = "NEGINF"

OPS = (VAR, CONST, ADD, MUL, NEG, DIV, EXP, MAX, NEGINF)

_RANK = {CONST: 0, VAR: 1, NEGINF: 2, EXP: 3, MAX: 4, DIV: 5, NEG: 6, MUL: 7, ADD: 8}

# Canonicalization recurses once per nesting level.
sys.setrecursionlimit(max(sys.getrecursionlimit(), 20000))


class ExprError(ValueError):
    """Raised when a term cannot be constructed (e.g. literal zero divisor)."""


class BudgetExceeded(ExprError):
    """Raised when distribution would create more terms than the budget allows."""


Number = Union[int, Fraction]


class Expr:
    """An immutable, interned symbolic term.

    ``op`` is one of the module-level op tags, ``args`` the child tuple and
    ``value`` the payload (variable name or exact rational) for leaves.
    ``key`` is a structural sort key, used for the canonical child order.
    """

    __slots__ = ("op", "args", "value", "key", "_hash", "_canon", "_free", "__weakref__")

    op: str
    args: tuple[Expr, ...]
    value: object
    key: tuple

    def __hash__(self) -> int:
        return self._hash

    def __reduce__(self):
        return (_rebuild, (self.op, self.args, self.value))

    def __repr__(self) -> str:
        return to_str(self)

    # operator sugar builds terms through the smart constructors
    def __add__(self, other):
        return add(self, _lift(other))

    def __radd__(self, other):
        return add(_lift(other), self)

    def __sub__(self, other):
        return add(self, neg(_lift(other)))

    def __rsub__(self, other):
        return add(_lift(other), neg(self))

    def __mul__(self, other):
        return mul(self, _lift(other))

    def __rmul__(self, other):
        return mul(_lift(other), self)

    def __truediv__(self, other):
        return div(self, _lift(other))

    def __rtruediv__(self, other):
        return div(_lift(other), self)

    def __neg__(self):
        return neg(self)

    @property
    def free_vars(self) -> frozenset[str]:
        fv = self._free
        if fv is None:
            if self.op == VAR:
                fv = frozenset((self.value,))
            elif not self.args:
                fv = frozenset()
            else:
                fv = frozenset().union(*(a.free_vars for a in self.args))
            self._free = fv
        return fv

    @property
    def is_const(self) -> bool:
        return self.op == CONST


_table: "weakref.WeakValueDictionary[tuple, Expr]" = weakref.WeakValueDictionary()
_table_lock = threading.Lock()


def _intern(op: str, args: tuple[Expr, ...], value: object = None) -> Expr:
    k = (op, args, value)
    with _table_lock:
        node = _table.get(k)
        if node is None:
            node = object.__new__(Expr)
            node.op = op
            node.args = args
            node.value = value
            node.key = (_RANK[op], value, tuple(a.key for a in args))
            node._hash = hash(k)
            node._canon = None
            node._free = None
            _table[k] = node
    return node


def _rebuild(op, args, value):
    return _intern(op, tuple(args), value)


def _lift(x) -> Expr:
    if isinstance(x, Expr):
        return x
    return const(x)


def _sorted(nodes: Iterable[Expr]) -> tuple[Expr, ...]:
    return tuple(sorted(nodes, key=lambda n: n.key))


# ---------------------------------------------------------------------------
# leaves
# ---------------------------------------------------------------------------


def const(value: Number | str) -> Expr:
    if isinstance(value, bool) or isinstance(value, float):
        raise TypeError(f"constants must be exact rationals, got {value!r}")
    return _intern(CONST, (), Fraction(value))


def var(name: str) -> Expr:
    if not name or any(ch.isspace() for ch in name):
        raise ExprError(f"invalid variable name {name!r}")
    return _intern(VAR, (), name)


ZERO = const(0)
ONE = const(1)
MINUS_ONE = const(-1)
NEG_INF = _intern(NEGINF, ())


def _is_zero(e: Expr) -> bool:
    return e is ZERO


# ---------------------------------------------------------------------------
# smart constructors (cheap local normalization only)
# ---------------------------------------------------------------------------


def add(*terms: Expr) -> Expr:
    flat: list[Expr] = []
    c = Fraction(0)
    for t in terms:
        if t.op == ADD:
            it = t.args
        else:
            it = (t,)
        for u in it:
            if u.op == CONST:
                c += u.value
            elif u.op == NEGINF:
                # -inf absorbs every finite summand
                return NEG_INF
            else:
                flat.append(u)
    if c != 0:
        flat.append(const(c))
    if not flat:
        return ZERO
    if len(flat) == 1:
        return flat[0]
    return _intern(ADD, _sorted(flat))


def mul(*factors: Expr) -> Expr:
    flat: list[Expr] = []
    c = Fraction(1)
    has_neginf = False
    for f in factors:
        it = f.args if f.op == MUL else (f,)
        for u in it:
            if u.op == CONST:
                c *= u.value
            elif u.op == NEGINF:
                has_neginf = True
            else:
                flat.append(u)
    if has_neginf:
        if flat or c <= 0:
            raise ExprError("-inf may only be scaled by a positive constant")
        return NEG_INF
    if c == 0:
        return ZERO
    if not flat:
        return const(c)
    if c != 1:
        flat.append(const(c))
    if len(flat) == 1:
        return flat[0]
    return _intern(MUL, _sorted(flat))


def neg(a: Expr) -> Expr:
    if a.op == CONST:
        return const(-a.value)
    if a.op == NEG:
        return a.args[0]
    if a.op == NEGINF:
        raise ExprError("+inf is not representable")
    return _intern(NEG, (a,))


def sub(a: Expr, b: Expr) -> Expr:
    return add(a, neg(b))


def div(num: Expr, den: Expr) -> Expr:
    if den.op == CONST:
        if den.value == 0:
            raise ExprError("division by literal zero")
        return mul(num, const(1 / den.value))
    if num.op == NEGINF or den.op == NEGINF:
        raise ExprError("-inf cannot appear in a division")
    if num is ZERO:
        return ZERO
    return _intern(DIV, (num, den))


def exp(a: Expr) -> Expr:
    if a is ZERO:
        return ONE
    if a.op == NEGINF:
        return ZERO
    return _intern(EXP, (a,))


def maximum(*args: Expr) -> Expr:
    if not args:
        raise ExprError("max needs at least one argument")
    seen: dict[Expr, None] = {}
    best: Fraction | None = None
    for a in args:
        for u in a.args if a.op == MAX else (a,):
            if u.op == CONST:
                best = u.value if best is None else max(best, u.value)
            else:
                seen[u] = None
    items = list(seen)
    if best is not None:
        items.append(const(best))
    if len(items) > 1:
        items = [u for u in items if u.op != NEGINF]
    if len(items) == 1:
        return items[0]
    return _intern(MAX, _sorted(items))


_BUILDERS = {
    ADD: add,
    MUL: mul,
    MAX: maximum,
}


def mk(op: str, *children: Expr, value: object = None) -> Expr:
    """Generic smart constructor: ``mk(ADD, x, y)``, ``mk(VAR, value='x')``."""
    if op == VAR:
        return var(value)  # type: ignore[arg-type]
    if op == CONST:
        return const(value)  # type: ignore[arg-type]
    if op == NEGINF:
        return NEG_INF
    if op in _BUILDERS:
        return _BUILDERS[op](*children)
    if op == NEG:
        (a,) = children
        return neg(a)
    if op == EXP:
        (a,) = children
        return exp(a)
    if op == DIV:
        a, b = children
        return div(a, b)
    raise ExprError(f"unknown op {op!r}")


# ---------------------------------------------------------------------------
# canonicalization
# ---------------------------------------------------------------------------

DEFAULT_NODE_BUDGET = 200_000

_state = threading.local()


def _cache_on() -> bool:
    return getattr(_state, "cache", True)


@contextlib.contextmanager
def caching(enabled: bool) -> Iterator[None]:
    """Temporarily enable/disable the persistent canonical-form cache (per thread)."""
    prev = _cache_on()
    _state.cache = enabled
    try:
        yield
    finally:
        _state.cache = prev


def _split_coeff(t: Expr) -> tuple[Fraction, Expr | None]:
    if t.op == CONST:
        return t.value, None
    if t.op == MUL and t.args[0].op == CONST:
        rest = t.args[1:]
        return t.args[0].value, rest[0] if len(rest) == 1 else _intern(MUL, rest)
    return Fraction(1), t


def _monomial_factors(m: Expr | None) -> tuple[Expr, ...]:
    if m is None:
        return ()
    return m.args if m.op == MUL else (m,)


def _term(c: Fraction, mono: Expr | None) -> Expr:
    if mono is None:
        return const(c)
    if c == 1:
        return mono
    return _intern(MUL, (const(c),) + _monomial_factors(mono))


def _collect(acc: dict[Expr | None, Fraction], t: Expr) -> bool:
    """Add canonical term ``t`` into ``acc``; returns True if t is -inf."""
    if t.op == NEGINF:
        return True
    if t.op == ADD:
        for u in t.args:
            c, m = _split_coeff(u)
            acc[m] = acc.get(m, 0) + c
        return False
    c, m = _split_coeff(t)
    acc[m] = acc.get(m, 0) + c
    return False


def _build_sum(acc: Mapping[Expr | None, Fraction]) -> Expr:
    terms = [_term(c, m) for m, c in acc.items() if c != 0]
    if not terms:
        return ZERO
    if len(terms) == 1:
        return terms[0]
    return _intern(ADD, _sorted(terms))


def _canon_sum(terms: Iterable[Expr]) -> Expr:
    acc: dict[Expr | None, Fraction] = {}
    for t in terms:
        if _collect(acc, t):
            return NEG_INF
    return _build_sum(acc)


def _make_monomial(factors: list[Expr]) -> tuple[Fraction, Expr | None]:
    exps = [f for f in factors if f.op == EXP]
    if len(exps) > 1:
        rest = [f for f in factors if f.op != EXP]
        arg = _canon_sum(f.args[0] for f in exps)
        e = exp(arg)
        if e is ZERO:
            return Fraction(0), None
        if e is not ONE:
            rest.append(e)
        factors = rest
    if not factors:
        return Fraction(1), None
    if len(factors) == 1:
        return Fraction(1), factors[0]
    return Fraction(1), _intern(MUL, _sorted(factors))


def _canon_product(factors: list[Expr], budget: int) -> Expr:
    if any(f.op == NEGINF for f in factors):
        return mul(*factors)
    # each factor as a list of (coeff, [non-const factors])
    expanded: list[list[tuple[Fraction, tuple[Expr, ...]]]] = []
    for f in factors:
        if f.op == CONST:
            if f.value == 0:
                return ZERO
            expanded.append([(f.value, ())])
        elif f.op == ADD:
            expanded.append(
                [(c, _monomial_factors(m)) for c, m in map(_split_coeff, f.args)]
            )
        else:
            c, m = _split_coeff(f)
            expanded.append([(c, _monomial_factors(m))])
    count = 1
    for choices in expanded:
        count *= len(choices)
        if count > budget:
            raise BudgetExceeded(f"distribution would create {count}+ terms (budget {budget})")
    partial: list[tuple[Fraction, tuple[Expr, ...]]] = [(Fraction(1), ())]
    for choices in expanded:
        partial = [(c1 * c2, f1 + f2) for c1, f1 in partial for c2, f2 in choices]
    acc: dict[Expr | None, Fraction] = {}
    for c, fs in partial:
        k, mono = _make_monomial(list(fs))
        if k == 0:
            continue
        acc[mono] = acc.get(mono, 0) + c * k
    return _build_sum(acc)


def canonicalize(e: Expr, budget: int | None = None) -> Expr:
    """Return the canonical form of ``e``.

    One bottom-up pass: children first, then the rewrite set (max flattening
    and deduplication, ``max(-inf, x) = x``, like-term cancellation,
    ``e^a * e^b = e^(a+b)``, distribution of products over sums).
    Idempotent; results are cached on the node unless caching is disabled.
    """
    if budget is None:
        budget = DEFAULT_NODE_BUDGET
    use_cache = _cache_on()
    memo: dict[Expr, Expr] = {}
    return _canon(e, budget, memo, use_cache)


def _canon(e: Expr, budget: int, memo: dict, use_cache: bool) -> Expr:
    if use_cache and e._canon is not None:
        return e._canon
    hit = memo.get(e)
    if hit is not None:
        return hit
    op = e.op
    if op in (VAR, CONST, NEGINF):
        r = e
    else:
        kids = [_canon(a, budget, memo, use_cache) for a in e.args]
        if op == ADD:
            r = _canon_sum(kids)
        elif op == MUL:
            r = _canon_product(kids, budget)
        elif op == NEG:
            if kids[0].op == NEGINF:
                raise ExprError("+inf is not representable")
            r = _canon_product([MINUS_ONE, kids[0]], budget)
        elif op == DIV:
            n, d = kids
            if d.op == CONST:
                if d.value == 0:
                    raise ExprError("division by literal zero")
                r = _canon_product([n, const(1 / d.value)], budget)
            elif n.op == NEGINF or d.op == NEGINF:
                raise ExprError("-inf cannot appear in a division")
            elif n is ZERO:
                r = ZERO
            else:
                r = _intern(DIV, (n, d))
        elif op == EXP:
            r = exp(kids[0])
        elif op == MAX:
            r = maximum(*kids)
        else:  # pragma: no cover
            raise ExprError(f"unknown op {op!r}")
    memo[e] = r
    if use_cache:
        e._canon = r
        r._canon = r
    return r


def is_canonical(e: Expr) -> bool:
    with caching(False):
        return canonicalize(e) is e


# ---------------------------------------------------------------------------
# traversal helpers
# ---------------------------------------------------------------------------


def iter_nodes(e: Expr) -> Iterator[Expr]:
    """Distinct nodes of ``e`` in post-order (children before parents)."""
    seen: set[int] = set()
    stack: list[tuple[Expr, bool]] = [(e, False)]
    while stack:
        node, expanded = stack.pop()
        if id(node) in seen:
            continue
        if expanded or not node.args:
            seen.add(id(node))
            yield node
            continue
        stack.append((node, True))
        for a in reversed(node.args):
            if id(a) not in seen:
                stack.append((a, False))


def node_count(e: Expr) -> int:
    return sum(1 for _ in iter_nodes(e))


def rebuild(e: Expr, fn) -> Expr:
    """Bottom-up rebuild; ``fn(node, new_args)`` returns the replacement node."""
    memo: dict[Expr, Expr] = {}
    for node in iter_nodes(e):
        new_args = tuple(memo[a] for a in node.args)
        memo[node] = fn(node, new_args)
    return memo[e]


def _remk(node: Expr, args: tuple[Expr, ...]) -> Expr:
    if not args:
        return node
    if args == node.args:
        return node
    return mk(node.op, *args)


def replace_nodes(e: Expr, mapping: Mapping[Expr, Expr]) -> Expr:
    """Replace whole subterms (matched by identity) and rebuild with ``mk``."""

    def fn(node, args):
        if node in mapping:
            return mapping[node]
        return _remk(node, args)

    return rebuild(e, fn)


def substitute(e: Expr, m: Mapping[str, Expr | Number]) -> Expr:
    """Simultaneous substitution of variables by terms, then canonicalize."""
    if not m:
        return canonicalize(e)
    repl = {name: _lift(v) for name, v in m.items()}

    def fn(node, args):
        if node.op == VAR and node.value in repl:
            return repl[node.value]
        return _remk(node, args)

    return canonicalize(rebuild(e, fn))


def contains_op(e: Expr, op: str) -> bool:
    return any(n.op == op for n in iter_nodes(e))


def to_str(e: Expr) -> str:
    """Human-readable infix rendering (not a serialization format)."""
    memo: dict[Expr, str] = {}
    for n in iter_nodes(e):
        a = [memo[c] for c in n.args]
        if n.op == VAR:
            s = n.value
        elif n.op == CONST:
            v = n.value
            s = str(v.numerator) if v.denominator == 1 else f"{v.numerator}/{v.denominator}"
            if v < 0 or v.denominator != 1:
                s = f"({s})"
        elif n.op == NEGINF:
            s = "-inf"
        elif n.op == ADD:
            s = "(" + " + ".join(a) + ")"
        elif n.op == MUL:
            s = "*".join(a)
        elif n.op == NEG:
            s = f"-{a[0]}"
        elif n.op == DIV:
            s = f"{a[0]}/{a[1]}" if n.args[1].op in (VAR, EXP, MAX, ADD) else f"{a[0]}/({a[1]})"
        elif n.op == EXP:
            s = f"exp({a[0]})"
        elif n.op == MAX:
            s = "max(" + ", ".join(a) + ")"
        else:  # pragma: no cover
            s = "?"
        memo[n] = s
    return memo[e]
