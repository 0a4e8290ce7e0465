"""Exp-polynomial sums and rational normalization of max-free terms.

An :class:`ExpPolySum` is ``sum_i p_i(x) * e^(c_i) * e^(h_i(x))`` with
polynomials ``p_i``, ``h_i`` (``h_i`` without constant term) and rational
``c_i``.  Terms are keyed by ``(h_i, c_i)``; two terms merge only when both
match.  Distinct keys denote linearly independent functions: for distinct
``h`` this is the classical result that distinct exponent polynomials give
independent exponentials, and for equal ``h`` with distinct rational ``c``
the factors ``e^c`` are linearly independent over the rationals (e is
transcendental), so the sum vanishes identically iff every ``p_i`` is the
zero polynomial.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping

from .. import symexpr as sx
from ..symexpr import ADD, CONST, DIV, EXP, MAX, MUL, NEG, NEGINF, VAR, Expr, iter_nodes
from .poly import DEFAULT_MONOMIAL_BUDGET, ONE_POLY, Poly, PolyBudgetExceeded

__all__ = [
    "ExpPolySum",
    "ExpPolyTerm",
    "NotExpPolynomial",
    "Rational",
    "is_zero",
    "to_exp_poly",
    "to_rational",
]


class NotExpPolynomial(ValueError):
    """The term falls outside the exp-polynomial class (e.g. nested exponentials)."""


@dataclass(frozen=True)
class ExpPolyTerm:
    coeff: Poly
    exponent: Poly  # no constant term
    exp_const: Fraction = Fraction(0)

    def __post_init__(self):
        if self.exponent.constant() != 0:
            raise ValueError("exponent polynomial must have zero constant term")

    @property
    def key(self):
        return (self.exponent, self.exp_const)

    def to_expr(self) -> Expr:
        c = _poly_expr(self.coeff)
        arg = sx.add(_poly_expr(self.exponent), sx.const(self.exp_const))
        return sx.mul(c, sx.exp(arg))


class ExpPolySum:
    """Canonical sum of exp-polynomial terms with pairwise-distinct keys."""

    __slots__ = ("_terms",)

    def __init__(self, terms: Mapping[tuple, Poly] | None = None):
        self._terms: dict[tuple, Poly] = {k: p for k, p in (terms or {}).items() if not p.is_zero()}

    @classmethod
    def from_terms(cls, terms: Iterable[ExpPolyTerm]) -> "ExpPolySum":
        acc: dict[tuple, Poly] = {}
        for t in terms:
            acc[t.key] = acc[t.key] + t.coeff if t.key in acc else t.coeff
        return cls(acc)

    @classmethod
    def poly(cls, p: Poly) -> "ExpPolySum":
        return cls({(Poly(), Fraction(0)): p})

    @classmethod
    def one(cls) -> "ExpPolySum":
        return cls.poly(ONE_POLY)

    @property
    def terms(self) -> list[ExpPolyTerm]:
        keys = sorted(self._terms, key=lambda k: (k[0].key(), k[1]))
        return [ExpPolyTerm(self._terms[k], k[0], k[1]) for k in keys]

    def __len__(self) -> int:
        return len(self._terms)

    def __eq__(self, other) -> bool:
        return isinstance(other, ExpPolySum) and self._terms == other._terms

    def __hash__(self):
        return hash(frozenset(self._terms.items()))

    def is_zero(self) -> bool:
        return not self._terms

    def is_one(self) -> bool:
        return self == _ONE

    def as_poly(self) -> Poly | None:
        """The plain polynomial this sum denotes, if it has no exponential part."""
        if not self._terms:
            return Poly()
        if len(self._terms) == 1:
            (h, c), p = next(iter(self._terms.items()))
            if h.is_zero() and c == 0:
                return p
        return None

    def monomials(self) -> int:
        return sum(len(p) for p in self._terms.values())

    def __add__(self, other: "ExpPolySum") -> "ExpPolySum":
        acc = dict(self._terms)
        for k, p in other._terms.items():
            acc[k] = acc[k] + p if k in acc else p
        return ExpPolySum(acc)

    def __neg__(self) -> "ExpPolySum":
        return ExpPolySum({k: -p for k, p in self._terms.items()})

    def __sub__(self, other: "ExpPolySum") -> "ExpPolySum":
        return self + (-other)

    def mul(self, other: "ExpPolySum", budget: int = DEFAULT_MONOMIAL_BUDGET) -> "ExpPolySum":
        if self.monomials() * other.monomials() > budget:
            raise PolyBudgetExceeded(
                f"product of {self.monomials()} x {other.monomials()} monomials exceeds budget {budget}"
            )
        acc: dict[tuple, Poly] = {}
        for (h1, c1), p1 in self._terms.items():
            for (h2, c2), p2 in other._terms.items():
                k = (h1 + h2, c1 + c2)
                p = p1.mul(p2, budget)
                acc[k] = acc[k] + p if k in acc else p
        return ExpPolySum(acc)

    def to_expr(self) -> Expr:
        return sx.add(*(t.to_expr() for t in self.terms)) if self._terms else sx.ZERO

    def __repr__(self) -> str:
        parts = []
        for t in self.terms:
            e = repr(t.exponent) if not t.exponent.is_zero() else ""
            if t.exp_const:
                e = f"{e} + {t.exp_const}" if e else str(t.exp_const)
            parts.append(f"({t.coeff})" + (f"*e^({e})" if e else ""))
        return " + ".join(parts) or "0"


_ONE = ExpPolySum.one()


def is_zero(s: ExpPolySum | Iterable[ExpPolyTerm]) -> bool:
    """Decide whether the exp-polynomial sum vanishes identically on R^n."""
    if not isinstance(s, ExpPolySum):
        s = ExpPolySum.from_terms(s)
    return s.is_zero()


def _poly_expr(p: Poly) -> Expr:
    terms = []
    for m, c in p.key():
        factors = [sx.const(c)]
        for v, e in m:
            factors.extend([sx.var(v)] * e)
        terms.append(sx.mul(*factors))
    return sx.add(*terms) if terms else sx.ZERO


# ---------------------------------------------------------------------------
# rational normalization
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Rational:
    num: ExpPolySum
    den: ExpPolySum


def to_rational(
    e: Expr,
    budget: int = DEFAULT_MONOMIAL_BUDGET,
    side: list[Expr] | None = None,
) -> Rational:
    """Normalize a max-free term to ``num / den`` over exp-polynomial sums.

    Every ``Div`` denominator encountered is appended to ``side`` (the caller
    must treat it as non-zero).  Raises :class:`NotExpPolynomial` for terms
    outside the class (exponents that are not polynomials, ``max``, ``-inf``).
    """
    memo: dict[Expr, Rational] = {}
    one = ExpPolySum.one()
    for n in iter_nodes(e):
        op = n.op
        if op == CONST:
            r = Rational(ExpPolySum.poly(Poly.const(n.value)), one)
        elif op == VAR:
            r = Rational(ExpPolySum.poly(Poly.var(n.value)), one)
        elif op == NEGINF:
            raise NotExpPolynomial("-inf is not a real value")
        elif op == MAX:
            raise NotExpPolynomial("max must be eliminated by case splitting first")
        else:
            kids = [memo[a] for a in n.args]
            if op == ADD:
                r = kids[0]
                for k in kids[1:]:
                    r = _add(r, k, budget)
            elif op == MUL:
                r = kids[0]
                for k in kids[1:]:
                    r = Rational(r.num.mul(k.num, budget), _mul_den(r.den, k.den, budget))
            elif op == NEG:
                r = Rational(-kids[0].num, kids[0].den)
            elif op == DIV:
                a, b = kids
                if side is not None:
                    side.append(n.args[1])
                r = Rational(a.num.mul(b.den, budget) if not b.den.is_one() else a.num,
                             _mul_den(a.den, b.num, budget))
            elif op == EXP:
                a = kids[0]
                if not a.den.is_one():
                    raise NotExpPolynomial("exponent is a rational function, not a polynomial")
                h = a.num.as_poly()
                if h is None:
                    raise NotExpPolynomial("nested exponential in an exponent")
                c = h.constant()
                r = Rational(ExpPolySum({(h.without_constant(), c): ONE_POLY}), one)
            else:  # pragma: no cover
                raise NotExpPolynomial(f"unsupported operator {op}")
        memo[n] = r
    return memo[e]


def _mul_den(a: ExpPolySum, b: ExpPolySum, budget: int) -> ExpPolySum:
    if a.is_one():
        return b
    if b.is_one():
        return a
    return a.mul(b, budget)


def _add(x: Rational, y: Rational, budget: int) -> Rational:
    if x.den == y.den:
        return Rational(x.num + y.num, x.den)
    return Rational(
        x.num.mul(y.den, budget) + y.num.mul(x.den, budget),
        x.den.mul(y.den, budget),
    )


def to_exp_poly(e: Expr, budget: int = DEFAULT_MONOMIAL_BUDGET) -> tuple[ExpPolySum, list[Expr]]:
    """Exp-polynomial form of ``e`` and the denominators assumed non-zero.

    For a division-free ``e`` the sum equals ``e`` everywhere.  When ``e``
    contains divisions the result is the numerator of its normalized
    fraction, which vanishes exactly where ``e`` does on the domain where the
    returned denominators are non-zero.
    """
    side: list[Expr] = []
    r = to_rational(e, budget, side)
    return r.num, side
