"""Rigorous interval evaluation of terms at rational points."""

from __future__ import annotations

import threading
from fractions import Fraction
from typing import Mapping

from mpmath.ctx_iv import MPIntervalContext

from .symexpr import ADD, CONST, DIV, EXP, MAX, MUL, NEG, NEGINF, VAR, Expr, iter_nodes

Assignment = Mapping[str, Fraction]


class Indeterminate(ArithmeticError):
    """A divisor enclosure contains zero; retry at higher precision or elsewhere."""


_local = threading.local()


def _ctx(precision: int) -> MPIntervalContext:
    # one interval context per thread; precision is context state
    ctx = getattr(_local, "ctx", None)
    if ctx is None:
        ctx = _local.ctx = MPIntervalContext()
    ctx.prec = precision
    return ctx


def _rat(ctx, q: Fraction):
    if q.denominator == 1:
        return ctx.mpf(q.numerator)
    return ctx.mpf(q.numerator) / q.denominator


def eval_numeric(e: Expr, a: Assignment, precision: int = 64):
    """Enclose the real value of ``e`` at the point ``a``.

    Returns an mpmath interval.  Raises :class:`Indeterminate` when a divisor
    encloses zero, and ``KeyError`` when ``a`` misses a free variable.
    """
    ctx = _ctx(precision)
    vals: dict[Expr, object] = {}
    for n in iter_nodes(e):
        op = n.op
        if op == CONST:
            v = _rat(ctx, n.value)
        elif op == VAR:
            v = _rat(ctx, Fraction(a[n.value]))
        elif op == NEGINF:
            v = ctx.mpf("-inf")
        else:
            xs = [vals[c] for c in n.args]
            if op == ADD:
                v = xs[0]
                for x in xs[1:]:
                    v = v + x
            elif op == MUL:
                v = xs[0]
                for x in xs[1:]:
                    v = v * x
            elif op == NEG:
                v = -xs[0]
            elif op == DIV:
                den = xs[1]
                if 0 in den:
                    raise Indeterminate(f"divisor enclosure {den} contains 0")
                v = xs[0] / den
            elif op == EXP:
                v = ctx.exp(xs[0])
            elif op == MAX:
                lo = xs[0].a
                hi = xs[0].b
                for x in xs[1:]:
                    if x.a > lo:
                        lo = x.a
                    if x.b > hi:
                        hi = x.b
                v = ctx.mpf([lo, hi])
            else:  # pragma: no cover
                raise ValueError(op)
        vals[n] = v
    return vals[e]


def disjoint(u, v) -> bool:
    """True iff the two enclosures provably denote different reals."""
    return bool(u.b < v.a) or bool(v.b < u.a)


def _mpf_fraction(m) -> Fraction:
    sign, man, exp, _ = m
    v = Fraction(int(man)) * (Fraction(2) ** exp)
    return -v if sign else v


def endpoints(iv) -> tuple[Fraction, Fraction]:
    """Exact rational lower and upper bounds of a finite enclosure."""
    lo, hi = iv._mpi_
    return _mpf_fraction(lo), _mpf_fraction(hi)


def fmt(iv, digits: int = 20) -> str:
    ctx = _ctx(64)
    return ctx.nstr(iv, digits)
