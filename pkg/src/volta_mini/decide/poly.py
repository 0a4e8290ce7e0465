"""Sparse multivariate polynomials with exact rational coefficients."""

from __future__ import annotations

from fractions import Fraction
from typing import Iterable, Mapping

Monomial = tuple  # tuple[tuple[str, int], ...] sorted by variable name; () is 1

DEFAULT_MONOMIAL_BUDGET = 10**6


class PolyBudgetExceeded(ArithmeticError):
    pass


def mono_mul(a: Monomial, b: Monomial) -> Monomial:
    if not a:
        return b
    if not b:
        return a
    out = []
    i = j = 0
    while i < len(a) and j < len(b):
        va, ea = a[i]
        vb, eb = b[j]
        if va == vb:
            out.append((va, ea + eb))
            i += 1
            j += 1
        elif va < vb:
            out.append(a[i])
            i += 1
        else:
            out.append(b[j])
            j += 1
    out.extend(a[i:])
    out.extend(b[j:])
    return tuple(out)


def mono_degree(m: Monomial) -> int:
    return sum(e for _, e in m)


class Poly:
    """Immutable polynomial: a map from monomials to non-zero Fractions."""

    __slots__ = ("terms", "_key")

    def __init__(self, terms: Mapping[Monomial, Fraction] | None = None):
        self.terms: dict[Monomial, Fraction] = {m: c for m, c in (terms or {}).items() if c != 0}
        self._key = None

    # constructors
    @classmethod
    def const(cls, c) -> "Poly":
        return cls({(): Fraction(c)})

    @classmethod
    def var(cls, name: str, power: int = 1) -> "Poly":
        return cls({((name, power),): Fraction(1)})

    # structure
    def key(self) -> tuple:
        if self._key is None:
            self._key = tuple(sorted(self.terms.items()))
        return self._key

    def __eq__(self, other) -> bool:
        return isinstance(other, Poly) and self.terms == other.terms

    def __hash__(self) -> int:
        return hash(self.key())

    def __lt__(self, other: "Poly") -> bool:
        return self.key() < other.key()

    def __len__(self) -> int:
        return len(self.terms)

    def is_zero(self) -> bool:
        return not self.terms

    def constant(self) -> Fraction:
        return self.terms.get((), Fraction(0))

    def without_constant(self) -> "Poly":
        return Poly({m: c for m, c in self.terms.items() if m})

    def is_constant(self) -> bool:
        return all(not m for m in self.terms)

    def degree(self) -> int:
        return max((mono_degree(m) for m in self.terms), default=0)

    def variables(self) -> set[str]:
        return {v for m in self.terms for v, _ in m}

    # arithmetic
    def __add__(self, other: "Poly") -> "Poly":
        if not other.terms:
            return self
        if not self.terms:
            return other
        t = dict(self.terms)
        for m, c in other.terms.items():
            t[m] = t.get(m, 0) + c
        return Poly(t)

    def __neg__(self) -> "Poly":
        return Poly({m: -c for m, c in self.terms.items()})

    def __sub__(self, other: "Poly") -> "Poly":
        return self + (-other)

    def scale(self, k: Fraction) -> "Poly":
        if k == 1:
            return self
        return Poly({m: c * k for m, c in self.terms.items()})

    def mul(self, other: "Poly", budget: int = DEFAULT_MONOMIAL_BUDGET) -> "Poly":
        if len(self.terms) * len(other.terms) > budget:
            raise PolyBudgetExceeded(
                f"product of {len(self.terms)} x {len(other.terms)} monomials exceeds budget {budget}"
            )
        t: dict[Monomial, Fraction] = {}
        for m1, c1 in self.terms.items():
            for m2, c2 in other.terms.items():
                m = mono_mul(m1, m2)
                t[m] = t.get(m, 0) + c1 * c2
        return Poly(t)

    __mul__ = mul

    def evaluate(self, point: Mapping[str, Fraction]) -> Fraction:
        total = Fraction(0)
        for m, c in self.terms.items():
            v = c
            for name, e in m:
                v *= Fraction(point[name]) ** e
            total += v
        return total

    def __repr__(self) -> str:
        if not self.terms:
            return "0"
        parts = []
        for m, c in self.key():
            mono = "*".join(v if e == 1 else f"{v}^{e}" for v, e in m)
            if not mono:
                parts.append(str(c))
            elif c == 1:
                parts.append(mono)
            else:
                parts.append(f"{c}*{mono}")
        return " + ".join(parts)


ZERO_POLY = Poly()
ONE_POLY = Poly.const(1)


def poly_sum(polys: Iterable[Poly]) -> Poly:
    t: dict[Monomial, Fraction] = {}
    for p in polys:
        for m, c in p.terms.items():
            t[m] = t.get(m, 0) + c
    return Poly(t)
