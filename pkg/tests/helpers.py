"""Co-execution of kernels: symbolic run plus substitution versus the interpreter."""

from __future__ import annotations

import random
from fractions import Fraction

import mpmath

from volta_mini import symexpr as sx
from volta_mini.frontend import LaunchConfig, parse_kernel
from volta_mini.interp import interpret
from volta_mini.ir import Addr
from volta_mini.numeric import endpoints, eval_numeric
from volta_mini.pipeline import execute, symbol_name

TOL = mpmath.mpf(10) ** -40


def random_inputs(launch, rng: random.Random) -> dict[Addr, Fraction]:
    """Small exact rationals for every input element."""
    return {
        Addr(a, i): Fraction(rng.randint(-24, 24), rng.choice((1, 2, 3, 4, 8)))
        for a in launch.inputs
        for i in range(launch.sizes[a])
    }


def symbolic_outputs(source: str, cfg: LaunchConfig):
    prep, out = execute(source, cfg)
    assert out.kind == "final", out
    return prep.launch, {g: e for g, e in out.shared.items() if g.array in prep.launch.outputs}


def evaluate(exprs: dict[Addr, sx.Expr], inputs: dict[Addr, Fraction]) -> dict[Addr, object]:
    point = {symbol_name(g.array, g.offset): v for g, v in inputs.items()}
    return {g: eval_numeric(e, point, 256) for g, e in exprs.items()}


def concrete(source: str, cfg: LaunchConfig, inputs: dict[Addr, Fraction]) -> dict[Addr, mpmath.mpf]:
    return interpret(parse_kernel(source), cfg, inputs)


def agrees(iv, v) -> bool:
    """The interpreter value ``v`` lies in the enclosure ``iv`` up to TOL."""
    lo, hi = endpoints(iv)
    with mpmath.workdps(80):
        slack = TOL * (1 + abs(v))
        return _mpf(lo) - slack <= v <= _mpf(hi) + slack


def _mpf(q: Fraction):
    return mpmath.mpf(q.numerator) / q.denominator


def differs(u, v) -> bool:
    return abs(u - v) > TOL * (1 + abs(u) + abs(v))
