"""Deciding equality of two terms over the reals.

``eq`` runs, in order: canonicalize ``f - g`` and test for literal zero; a
few random evaluations that may rigorously separate the sides; elimination of
``max`` by case splitting; per case, rational normalization to an
exp-polynomial numerator and an exact zero test.  ``Equal`` means equality on
the domain where the recorded denominators are non-zero.
"""

from __future__ import annotations

import os
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

from .. import symexpr as sx
from ..numeric import Indeterminate, disjoint, eval_numeric, fmt
from ..symexpr import ADD, CONST, DIV, EXP, MAX, MUL, NEGINF, BudgetExceeded, Expr, ExprError
from .exppoly import NotExpPolynomial, to_rational
from .poly import DEFAULT_MONOMIAL_BUDGET, PolyBudgetExceeded

DEFAULT_CASE_BUDGET = 10_000
BUDGET_ENV = "VOLTA_MINI_BUDGET"


@dataclass(frozen=True)
class Budgets:
    cases: int = DEFAULT_CASE_BUDGET
    monomials: int = DEFAULT_MONOMIAL_BUDGET
    nodes: int = sx.DEFAULT_NODE_BUDGET

    @classmethod
    def parse(cls, text: str) -> "Budgets":
        """Parse ``"cases=N,monomials=N,nodes=N"`` (any subset, any order)."""
        vals: dict[str, int] = {}
        for part in filter(None, (p.strip() for p in text.split(","))):
            key, sep, value = part.partition("=")
            key = key.strip()
            if not sep or key not in ("cases", "monomials", "nodes"):
                raise ValueError(f"bad budget entry {part!r} (expected cases=, monomials=, nodes=)")
            try:
                n = int(value)
            except ValueError:
                raise ValueError(f"budget {key} must be an integer, got {value!r}") from None
            if n < 1:
                raise ValueError(f"budget {key} must be positive")
            vals[key] = n
        return cls(**vals)

    @classmethod
    def from_env(cls, environ: Mapping[str, str] | None = None) -> "Budgets":
        env = os.environ if environ is None else environ
        text = env.get(BUDGET_ENV, "")
        return cls.parse(text) if text.strip() else cls()


# ---------------------------------------------------------------------------
# verdicts
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SideCondition:
    """``expr != 0`` was assumed; ``discharged`` when shown positive."""

    expr: Expr
    discharged: bool

    def as_dict(self) -> dict:
        return {"nonzero": sx.to_str(self.expr), "discharged": self.discharged}


@dataclass(frozen=True)
class Witness:
    point: Mapping[str, Fraction]
    lhs: str  # interval enclosures, rendered
    rhs: str
    precision: int

    def as_dict(self) -> dict:
        return {
            "point": {k: _frac_str(v) for k, v in sorted(self.point.items())},
            "lhs": self.lhs,
            "rhs": self.rhs,
            "precision": self.precision,
        }


def _frac_str(q: Fraction) -> str:
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


@dataclass(frozen=True)
class Equal:
    side_conditions: tuple[SideCondition, ...] = ()
    method: str = "canonical"  # "canonical" | "exp-poly"
    cases: int = 1
    kind = "equal"


@dataclass(frozen=True)
class NotEqual:
    witness: Witness
    side_conditions: tuple[SideCondition, ...] = ()
    kind = "not-equal"


@dataclass(frozen=True)
class Unknown:
    reason: str
    side_conditions: tuple[SideCondition, ...] = ()
    kind = "unknown"


Verdict = Equal | NotEqual | Unknown


# ---------------------------------------------------------------------------
# positivity and side conditions
# ---------------------------------------------------------------------------


_POS, _NONNEG = 2, 1


def _sign(n: Expr, memo: Mapping[Expr, int]) -> int:
    """2 when ``n > 0`` everywhere, 1 when ``n >= 0``, 0 when unknown."""
    op = n.op
    if op == CONST:
        return _POS if n.value > 0 else _NONNEG if n.value == 0 else 0
    if op == EXP:
        return _POS
    if op == ADD:
        signs = [memo[a] for a in n.args]
        return 0 if min(signs) == 0 else max(signs)
    if op == MUL:
        counts: dict[Expr, int] = {}
        for a in n.args:
            counts[a] = counts.get(a, 0) + 1
        # a repeated factor contributes a square, which is never negative
        signs = [memo[a] if k % 2 or memo[a] else _NONNEG for a, k in counts.items()]
        return min(signs)
    if op == DIV:
        a, b = (memo[x] for x in n.args)
        return a if b == _POS else 0
    if op == MAX:
        return max(memo[a] for a in n.args)
    return 0


def is_positive(e: Expr) -> bool:
    """Sufficient syntactic test for ``e > 0`` everywhere."""
    memo: dict[Expr, int] = {}
    for n in sx.iter_nodes(e):
        memo[n] = _sign(n, memo)
    return memo[e] == _POS


def side_conditions(*exprs: Expr) -> tuple[SideCondition, ...]:
    """Denominators of every division in ``exprs``, deduplicated, in order."""
    seen: dict[Expr, None] = {}
    for e in exprs:
        for n in sx.iter_nodes(e):
            if n.op == DIV:
                seen.setdefault(n.args[1], None)
    return tuple(SideCondition(d, is_positive(d)) for d in seen)


# ---------------------------------------------------------------------------
# refutation
# ---------------------------------------------------------------------------

PRECISIONS = (64, 128, 256)


def _points(names: Sequence[str], trials: int, seed: int):
    rng = random.Random(seed)
    yield {v: Fraction(0) for v in names}
    for k in range(1, trials):
        box = 1 + k // 4
        den = (1, 2, 3, 4)[rng.randrange(4)]
        yield {v: Fraction(rng.randint(-box * den, box * den), den) for v in names}


def separate(f: Expr, g: Expr, point: Mapping[str, Fraction]) -> Witness | None:
    """Rigorously separate ``f`` and ``g`` at ``point``, escalating precision."""
    for prec in PRECISIONS:
        try:
            a = eval_numeric(f, point, prec)
            b = eval_numeric(g, point, prec)
        except Indeterminate:
            continue
        if disjoint(a, b):
            return Witness(dict(point), fmt(a), fmt(b), prec)
        # overlapping tight enclosures: more bits will not help much
        if a.delta < 2**-40 and b.delta < 2**-40:
            return None
    return None


def refute_random(f: Expr, g: Expr, trials: int = 32, seed: int = 0) -> Witness | None:
    """Search rational points for a rigorous separation of ``f`` and ``g``.

    The first point is the origin; later points are drawn from a growing
    integer box with small denominators.  ``None`` is not a proof of equality.
    """
    names = sorted(f.free_vars | g.free_vars)
    for point in _points(names, max(trials, 1), seed):
        w = separate(f, g, point)
        if w is not None:
            return w
    return None


# ---------------------------------------------------------------------------
# max elimination
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Case:
    """``expr`` equals the split term wherever each ``winner >= loser`` holds."""

    constraints: tuple[tuple[Expr, Expr], ...]
    expr: Expr


class CaseBudgetExceeded(RuntimeError):
    pass


def _innermost_max(e: Expr) -> Expr | None:
    for n in sx.iter_nodes(e):  # post-order: the first max seen has max-free arguments
        if n.op == MAX:
            return n
    return None


def _infeasible(new: Sequence[tuple[Expr, Expr]], known: dict[Expr, set[Expr]]) -> bool:
    """True when the strict order implied by the edges must contain a cycle."""
    for w, l in new:
        d = sx.canonicalize(sx.sub(w, l))
        if d.op == CONST and d.value < 0:
            return True
        # l >= ... >= w already known means w > l closes a cycle
        stack, seen = [l], {l}
        while stack:
            x = stack.pop()
            if x is w:
                return True
            for y in known.get(x, ()):
                if y not in seen:
                    seen.add(y)
                    stack.append(y)
    return False


def split_max(e: Expr, budget: int = DEFAULT_CASE_BUDGET) -> list[Case]:
    """Max-free specializations of ``e`` covering every point of R^n.

    The innermost ``max`` is replaced by each of its arguments in turn, under
    the constraint that the chosen argument dominates the others; cases whose
    constraints form a strict cycle are dropped.  With ties broken by
    canonical argument order, every point satisfies the choices of exactly one
    surviving case, whose expression equals ``e`` there.
    """
    e = sx.canonicalize(e)
    out: list[Case] = []
    stack: list[tuple[Expr, tuple, dict]] = [(e, (), {})]
    while stack:
        expr, cons, graph = stack.pop()
        m = _innermost_max(expr)
        if m is None:
            out.append(Case(cons, expr))
            if len(out) > budget:
                raise CaseBudgetExceeded(f"more than {budget} max cases")
            continue
        branches = []
        for w in m.args:
            edges = [(w, l) for l in m.args if l is not w]
            if _infeasible(edges, graph):
                continue
            g2 = {k: set(v) for k, v in graph.items()}
            for a, b in edges:
                g2.setdefault(a, set()).add(b)
            branches.append((sx.canonicalize(sx.replace_nodes(expr, {m: w})), cons + tuple(edges), g2))
        stack.extend(reversed(branches))
        if len(stack) + len(out) > budget:
            raise CaseBudgetExceeded(f"more than {budget} max cases")
    return out


FM_LIMIT = 4096


def _affine(e: Expr) -> dict | None:
    """Coefficients of an affine function (``None`` key = constant), or None."""
    try:
        r = to_rational(sx.canonicalize(e))
    except (NotExpPolynomial, PolyBudgetExceeded, BudgetExceeded):
        return None
    p = r.num.as_poly() if r.den.is_one() else None
    if p is None or p.degree() > 1:
        return None
    return {(m[0][0] if m else None): c for m, c in p.terms.items()}


def interior_empty(case: Case) -> bool:
    """True when the strict constraints ``winner > loser`` are jointly infeasible.

    Only affine constraints are examined (exact Fourier-Motzkin elimination);
    anything else, or a system that grows past a size limit, is treated as
    feasible.  A case with empty interior lies in a nowhere-dense set, so it
    cannot affect an identity between continuous functions.
    """
    rows = []
    for w, l in case.constraints:
        a = _affine(sx.sub(w, l))
        if a is None:
            continue
        rows.append(a)
    if not rows:
        return False
    names = sorted({k for r in rows for k in r if k is not None})
    for v in names:
        pos = [r for r in rows if r.get(v, 0) > 0]
        neg = [r for r in rows if r.get(v, 0) < 0]
        rest = [r for r in rows if r.get(v, 0) == 0]
        if len(pos) * len(neg) + len(rest) > FM_LIMIT:
            return False
        for p in pos:
            for q in neg:
                cp, cq = p[v], -q[v]
                comb: dict = {}
                for k in set(p) | set(q):
                    if k == v:
                        continue
                    c = p.get(k, 0) * cq + q.get(k, 0) * cp
                    if c:
                        comb[k] = c
                rest.append(comb)
        rows = rest
    return any(r.get(None, 0) <= 0 for r in rows)


# ---------------------------------------------------------------------------
# eq
# ---------------------------------------------------------------------------


def _point_in_case(case: Case, names: Sequence[str], trials: int, seed: int):
    """Random points satisfying the case's dominance constraints (best effort)."""
    rng = random.Random(seed)
    for k in range(trials):
        box = 1 + k // 8
        point = {v: Fraction(rng.randint(-4 * box, 4 * box), 2) for v in names}
        ok = True
        for w, l in case.constraints:
            try:
                a = eval_numeric(w, point)
                b = eval_numeric(l, point)
            except Indeterminate:
                ok = False
                break
            if not a.a > b.b:
                ok = False
                break
        if ok:
            yield point


def eq(
    f: Expr,
    g: Expr,
    *,
    budgets: Budgets | None = None,
    seed: int = 0,
    quick_trials: int = 4,
    refute_trials: int = 64,
) -> Verdict:
    """Decide ``f = g`` as real functions (modulo non-zero denominators)."""
    b = budgets or Budgets()
    try:
        f = sx.canonicalize(f, b.nodes)
        g = sx.canonicalize(g, b.nodes)
    except ExprError as exc:
        return Unknown(f"cannot canonicalize: {exc}")
    sides = side_conditions(f, g)
    if f.op == NEGINF or g.op == NEGINF:
        if f is g:
            return Equal(sides)
        names = sorted(f.free_vars | g.free_vars)
        w = separate(f, g, {v: Fraction(0) for v in names})
        return NotEqual(w, sides) if w else Unknown("-inf compared with a finite value", sides)
    try:
        d = sx.canonicalize(sx.sub(f, g), b.nodes)
    except BudgetExceeded as exc:
        d = None
        reason = f"node budget exceeded: {exc}"
    if d is sx.ZERO:
        return Equal(sides, "canonical")

    w = refute_random(f, g, quick_trials, seed)
    if w is not None:
        return NotEqual(w, sides)
    if d is None:
        return _fallback(f, g, reason, sides, refute_trials, seed)

    try:
        cases = split_max(d, b.cases)
    except (CaseBudgetExceeded, BudgetExceeded) as exc:
        return _fallback(f, g, str(exc), sides, refute_trials, seed)
    nonzero: list[Case] = []
    for case in cases:
        try:
            num = to_rational(case.expr, b.monomials).num
        except (NotExpPolynomial, PolyBudgetExceeded, BudgetExceeded) as exc:
            return _fallback(f, g, f"{type(exc).__name__}: {exc}", sides, refute_trials, seed)
        if not num.is_zero() and not interior_empty(case):
            nonzero.append(case)
    if not nonzero:
        return Equal(sides, "exp-poly", len(cases))
    # a non-zero case refutes equality only if its region is non-empty: look for a witness
    names = sorted(f.free_vars | g.free_vars)
    for i, case in enumerate(nonzero[:16]):
        for point in _point_in_case(case, names, 64, seed + i):
            w = separate(f, g, point)
            if w is not None:
                return NotEqual(w, sides)
    return _fallback(f, g, f"{len(nonzero)} of {len(cases)} cases do not vanish", sides, refute_trials, seed)


def _fallback(f, g, reason, sides, trials, seed) -> Verdict:
    w = refute_random(f, g, trials, seed + 1)
    if w is not None:
        return NotEqual(w, sides)
    return Unknown(reason, sides)
