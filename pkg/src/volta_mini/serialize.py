"""Line-oriented node-table format for terms.

One node per line, children referenced by index, so shared subterms are
written once::

    0 VAR x_0
    1 EXP 0
    2 CONST 1/1
    3 ADD 1 2
    ROOT 3

Environment files hold several named roots sharing one table::

    ROOT y[0] 3
"""

from __future__ import annotations

import re
from fractions import Fraction
from typing import Mapping

from .symexpr import (
    ADD,
    CONST,
    DIV,
    EXP,
    MAX,
    MUL,
    NEG,
    NEGINF,
    VAR,
    Expr,
    const,
    iter_nodes,
    mk,
    var,
)


class FormatError(ValueError):
    pass


_NARY = {ADD, MUL, MAX}
_UNARY = {NEG, EXP}


def _node_lines(roots: list[Expr]) -> tuple[list[str], dict[Expr, int]]:
    index: dict[Expr, int] = {}
    lines: list[str] = []
    for r in roots:
        for n in iter_nodes(r):
            if n in index:
                continue
            i = len(index)
            index[n] = i
            if n.op == VAR:
                body = f"VAR {n.value}"
            elif n.op == CONST:
                body = f"CONST {n.value.numerator}/{n.value.denominator}"
            elif n.op == NEGINF:
                body = "NEGINF"
            else:
                body = n.op + "".join(f" {index[c]}" for c in n.args)
            lines.append(f"{i} {body}")
    return lines, index


def dumps(e: Expr) -> str:
    lines, index = _node_lines([e])
    lines.append(f"ROOT {index[e]}")
    return "\n".join(lines) + "\n"


def dumps_env(roots: Mapping[str, Expr]) -> str:
    """Serialize named roots (e.g. ``y[0]``) over one shared node table."""
    names = list(roots)
    lines, index = _node_lines([roots[k] for k in names])
    for k in names:
        if not k or any(ch.isspace() for ch in k):
            raise FormatError(f"invalid root name {k!r}")
        lines.append(f"ROOT {k} {index[roots[k]]}")
    return "\n".join(lines) + ("\n" if lines else "")


_CONST_RE = re.compile(r"^-?\d+/\d+$")


def _parse(text: str) -> tuple[dict[int, Expr], list[tuple[str | None, int]]]:
    nodes: dict[int, Expr] = {}
    roots: list[tuple[str | None, int]] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        parts = line.split()
        try:
            if parts[0] == "ROOT":
                if len(parts) == 2:
                    roots.append((None, int(parts[1])))
                elif len(parts) == 3:
                    roots.append((parts[1], int(parts[2])))
                else:
                    raise FormatError("ROOT takes 1 or 2 operands")
                continue
            idx = int(parts[0])
            if idx in nodes:
                raise FormatError(f"duplicate node index {idx}")
            op = parts[1]
            rest = parts[2:]
            if op == VAR:
                (name,) = rest
                node = var(name)
            elif op == CONST:
                (num,) = rest
                if not _CONST_RE.match(num):
                    raise FormatError(f"bad constant {num!r}")
                p, q = num.split("/")
                if int(q) == 0:
                    raise FormatError("zero denominator in constant")
                node = const(Fraction(int(p), int(q)))
            elif op == NEGINF:
                if rest:
                    raise FormatError("NEGINF takes no operands")
                node = mk(NEGINF)
            else:
                kids = [nodes[int(t)] for t in rest]
                if op in _NARY:
                    if not kids:
                        raise FormatError(f"{op} needs operands")
                elif op in _UNARY:
                    if len(kids) != 1:
                        raise FormatError(f"{op} takes one operand")
                elif op == DIV:
                    if len(kids) != 2:
                        raise FormatError("DIV takes two operands")
                else:
                    raise FormatError(f"unknown op {op!r}")
                node = mk(op, *kids)
        except FormatError as exc:
            raise FormatError(f"line {lineno}: {exc}") from None
        except (ValueError, KeyError, IndexError) as exc:
            raise FormatError(f"line {lineno}: malformed node line {raw!r} ({exc})") from None
        nodes[idx] = node
    for _, i in roots:
        if i not in nodes:
            raise FormatError(f"ROOT references unknown node {i}")
    return nodes, roots


def loads(text: str) -> Expr:
    nodes, roots = _parse(text)
    if len(roots) != 1 or roots[0][0] is not None:
        raise FormatError("expected exactly one unnamed ROOT line")
    return nodes[roots[0][1]]


def loads_env(text: str) -> dict[str, Expr]:
    nodes, roots = _parse(text)
    out: dict[str, Expr] = {}
    for name, i in roots:
        if name is None:
            raise FormatError("environment roots must be named")
        if name in out:
            raise FormatError(f"duplicate root {name}")
        out[name] = nodes[i]
    return out
