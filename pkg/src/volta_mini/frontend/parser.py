"""Tokenizer and recursive-descent parser for the mini kernel language.

Grammar (informal)::

    kernel   := 'kernel' IDENT '{' item* '}'
    item     := 'param' IDENT ('=' INT)? ';'
              | ('in' | 'out' | 'shared') IDENT '[' expr ']' ';'
              | stmt
    stmt     := ('float' | 'int') IDENT ('=' expr)? ';'
              | lvalue ('=' | '+=' | '-=' | '*=' | '/=') expr ';'
              | 'for' '(' 'int' IDENT '=' expr ';' expr ';' update ')' stmt
              | 'if' '(' expr ')' stmt ('else' stmt)?
              | '{' stmt* '}'
              | 'sync' ';' | '__syncthreads' '(' ')' ';'
              | ('syncwarp' | '__syncwarp') '(' warpspec? ')' ';'
              | 'return' ';'
    warpspec := '{' expr (',' expr)* '}' | '{' expr '..' expr '}' | expr | expr ',' expr

Expressions follow C precedence (``||``, ``&&``, comparisons, ``+ -``,
``* / %``, unary ``- !``).  Calls: ``exp``/``expf``, ``max``/``fmaxf``,
``min``/``fminf``.  ``-inf`` / ``INFINITY`` denote negative / positive
infinity seeds (only ``-inf`` is representable).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Union


class KernelSyntaxError(SyntaxError):
    """Syntax or declaration diagnostic with a 1-based line and column."""

    def __init__(self, msg: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {msg}")
        self.msg_text = msg
        self.line = line
        self.col = col


# ---------------------------------------------------------------------------
# AST
# ---------------------------------------------------------------------------

Loc = tuple  # (line, col)


@dataclass(frozen=True)
class Num:
    value: Fraction
    is_int: bool
    loc: Loc


@dataclass(frozen=True)
class Inf:
    loc: Loc


@dataclass(frozen=True)
class Name:
    id: str
    loc: Loc


@dataclass(frozen=True)
class Index:
    array: str
    index: "Expr"
    loc: Loc


@dataclass(frozen=True)
class Unary:
    op: str  # '-' or '!'
    arg: "Expr"
    loc: Loc


@dataclass(frozen=True)
class Binary:
    op: str
    a: "Expr"
    b: "Expr"
    loc: Loc


@dataclass(frozen=True)
class Call:
    fn: str
    args: tuple
    loc: Loc


Expr = Union[Num, Inf, Name, Index, Unary, Binary, Call]


@dataclass(frozen=True)
class VarDecl:
    kind: str  # 'float' | 'int'
    name: str
    init: Optional[Expr]
    loc: Loc


@dataclass(frozen=True)
class Assign:
    target: Union[Name, Index]
    op: str  # '=', '+=', '-=', '*=', '/='
    value: Expr
    loc: Loc


@dataclass(frozen=True)
class For:
    var: str
    start: Expr
    cond: Expr
    update: Assign
    body: "Stmt"
    loc: Loc


@dataclass(frozen=True)
class If:
    cond: Expr
    then: "Stmt"
    orelse: Optional["Stmt"]
    loc: Loc


@dataclass(frozen=True)
class Block:
    stmts: tuple
    loc: Loc


@dataclass(frozen=True)
class SyncAll:
    loc: Loc


@dataclass(frozen=True)
class SyncWarp:
    form: str  # 'own' | 'mask' | 'warp-mask' | 'set' | 'range'
    args: tuple
    loc: Loc


@dataclass(frozen=True)
class Return:
    loc: Loc


Stmt = Union[VarDecl, Assign, For, If, Block, SyncAll, SyncWarp, Return]

ROLES = {"in": "input", "out": "output", "shared": "scratch"}


@dataclass(frozen=True)
class ArrayDecl:
    name: str
    size: Expr
    role: str  # 'input' | 'output' | 'scratch'
    loc: Loc


@dataclass(frozen=True)
class ParamDecl:
    name: str
    default: Optional[int]
    loc: Loc


@dataclass(frozen=True)
class KernelAst:
    name: str
    params: tuple[ParamDecl, ...]
    arrays: tuple[ArrayDecl, ...]
    body: tuple[Stmt, ...]
    loc: Loc = (1, 1)

    def array(self, name: str) -> ArrayDecl | None:
        for a in self.arrays:
            if a.name == name:
                return a
        return None

    def count_stmts(self, kind: type) -> int:
        return sum(1 for s in walk(self.body) if isinstance(s, kind))


def walk(stmts):
    for s in stmts:
        yield s
        if isinstance(s, Block):
            yield from walk(s.stmts)
        elif isinstance(s, For):
            yield from walk((s.body,))
        elif isinstance(s, If):
            yield from walk((s.then,) + ((s.orelse,) if s.orelse is not None else ()))


BUILTINS = ("tid", "nthreads", "warpsize")
DATA_FUNCS = {"exp": 1, "expf": 1, "__expf": 1, "max": -2, "fmaxf": -2, "min": -2, "fminf": -2}
KEYWORDS = {
    "kernel", "param", "in", "out", "shared", "float", "int", "for", "if", "else",
    "sync", "__syncthreads", "syncwarp", "__syncwarp", "return",
}


# ---------------------------------------------------------------------------
# tokens
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Tok:
    kind: str  # 'id' | 'num' | 'op' | 'eof'
    text: str
    line: int
    col: int


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<lc>//[^\n]*)
  | (?P<bc>/\*)
  | (?P<hex>0[xX][0-9a-fA-F]+)
  | (?P<num>\d+(?:\.\d+)?(?:[eE][+-]?\d+)?f?|\.\d+(?:[eE][+-]?\d+)?f?)
  | (?P<id>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>\+\+|--|\+=|-=|\*=|/=|==|!=|<=|>=|&&|\|\||\.\.|[-+*/%<>=!(){}\[\];,])
    """,
    re.VERBOSE,
)


def tokenize(text: str) -> list[Tok]:
    toks: list[Tok] = []
    pos = 0
    line, line_start = 1, 0
    n = len(text)
    while pos < n:
        m = _TOKEN_RE.match(text, pos)
        col = pos - line_start + 1
        if m is None:
            raise KernelSyntaxError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        s = m.group()
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind == "bc":
            end = text.find("*/", m.end())
            if end < 0:
                raise KernelSyntaxError("unterminated comment", line, col)
            chunk = text[pos : end + 2]
            if "\n" in chunk:
                line += chunk.count("\n")
                line_start = pos + chunk.rfind("\n") + 1
            pos = end + 2
            continue
        elif kind in ("ws", "lc"):
            pass
        elif kind == "hex":
            toks.append(Tok("num", str(int(s, 16)), line, col))
        else:
            toks.append(Tok(kind, s, line, col))
        pos = m.end()
    toks.append(Tok("eof", "", line, pos - line_start + 1))
    return toks


def _parse_number(text: str) -> tuple[Fraction, bool]:
    t = text[:-1] if text.endswith("f") else text
    is_int = re.fullmatch(r"\d+", t) is not None
    return Fraction(t), is_int  # Fraction parses decimal/scientific text exactly


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


class _Parser:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.i = 0

    # helpers
    @property
    def tok(self) -> Tok:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Tok:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def error(self, msg: str, tok: Tok | None = None):
        t = tok or self.tok
        raise KernelSyntaxError(msg, t.line, t.col)

    def at(self, text: str) -> bool:
        t = self.tok
        return t.kind in ("op", "id") and t.text == text

    def accept(self, text: str) -> Tok | None:
        if self.at(text):
            t = self.tok
            self.i += 1
            return t
        return None

    def expect(self, text: str) -> Tok:
        t = self.accept(text)
        if t is None:
            got = self.tok.text or "end of input"
            self.error(f"expected {text!r}, got {got!r}")
        return t

    def ident(self) -> Tok:
        t = self.tok
        if t.kind != "id" or t.text in KEYWORDS:
            self.error(f"expected identifier, got {t.text or 'end of input'!r}")
        self.i += 1
        return t

    # top level
    def kernel(self) -> KernelAst:
        start = self.expect("kernel")
        name = self.ident().text
        self.expect("{")
        params: list[ParamDecl] = []
        arrays: list[ArrayDecl] = []
        body: list[Stmt] = []
        while not self.at("}"):
            if self.tok.kind == "eof":
                self.error("unbalanced '{': missing '}' before end of input")
            t = self.tok
            if self.accept("param"):
                pname = self.ident()
                default = None
                if self.accept("="):
                    num = self.tok
                    if num.kind != "num":
                        self.error("parameter default must be an integer literal")
                    v, is_int = _parse_number(num.text)
                    if not is_int:
                        self.error("parameter default must be an integer literal")
                    default = int(v)
                    self.i += 1
                self.expect(";")
                params.append(ParamDecl(pname.text, default, (t.line, t.col)))
            elif t.text in ROLES and t.kind == "id":
                self.i += 1
                aname = self.ident()
                self.expect("[")
                size = self.expr()
                self.expect("]")
                self.expect(";")
                arrays.append(ArrayDecl(aname.text, size, ROLES[t.text], (t.line, t.col)))
            else:
                body.append(self.stmt())
        self.expect("}")
        if self.tok.kind != "eof":
            self.error("unexpected text after kernel body")
        return KernelAst(name, tuple(params), tuple(arrays), tuple(body), (start.line, start.col))

    def stmt(self) -> Stmt:
        t = self.tok
        loc = (t.line, t.col)
        if t.kind == "op" and t.text == "{":
            self.i += 1
            stmts = []
            while not self.at("}"):
                if self.tok.kind == "eof":
                    self.error(f"unbalanced '{{' opened at {t.line}:{t.col}", t)
                stmts.append(self.stmt())
            self.expect("}")
            return Block(tuple(stmts), loc)
        if t.kind == "id":
            if t.text in ("float", "int"):
                self.i += 1
                name = self.ident().text
                init = self.expr() if self.accept("=") else None
                self.expect(";")
                return VarDecl(t.text, name, init, loc)
            if t.text == "for":
                return self.for_stmt()
            if t.text == "if":
                self.i += 1
                self.expect("(")
                cond = self.expr()
                self.expect(")")
                then = self.stmt()
                orelse = self.stmt() if self.accept("else") else None
                return If(cond, then, orelse, loc)
            if t.text == "sync":
                self.i += 1
                self.expect(";")
                return SyncAll(loc)
            if t.text == "__syncthreads":
                self.i += 1
                self.expect("(")
                self.expect(")")
                self.expect(";")
                return SyncAll(loc)
            if t.text in ("syncwarp", "__syncwarp"):
                return self.syncwarp()
            if t.text == "return":
                self.i += 1
                self.expect(";")
                return Return(loc)
            if t.text in KEYWORDS:
                self.error(f"unexpected keyword {t.text!r}")
            s = self.assignment()
            self.expect(";")
            return s
        if t.kind == "eof":
            self.error("unexpected end of input")
        self.error(f"unexpected {t.text!r}")

    def assignment(self) -> Assign:
        t = self.tok
        loc = (t.line, t.col)
        target = self.lvalue()
        op_tok = self.tok
        if op_tok.kind == "op" and op_tok.text in ("=", "+=", "-=", "*=", "/="):
            self.i += 1
            return Assign(target, op_tok.text, self.expr(), loc)
        if op_tok.kind == "op" and op_tok.text in ("++", "--"):
            self.i += 1
            one = Num(Fraction(1), True, (op_tok.line, op_tok.col))
            return Assign(target, "+=" if op_tok.text == "++" else "-=", one, loc)
        self.error(f"expected assignment operator, got {op_tok.text or 'end of input'!r}")

    def lvalue(self) -> Union[Name, Index]:
        t = self.ident()
        if self.accept("["):
            idx = self.expr()
            self.expect("]")
            return Index(t.text, idx, (t.line, t.col))
        return Name(t.text, (t.line, t.col))

    def for_stmt(self) -> For:
        t = self.expect("for")
        self.expect("(")
        self.expect("int")
        var = self.ident().text
        self.expect("=")
        start = self.expr()
        self.expect(";")
        cond = self.expr()
        self.expect(";")
        upd = self.assignment()
        if not isinstance(upd.target, Name) or upd.target.id != var:
            self.error(f"loop update must assign the loop variable {var!r}")
        self.expect(")")
        body = self.stmt()
        return For(var, start, cond, upd, body, (t.line, t.col))

    def syncwarp(self) -> SyncWarp:
        t = self.tok
        self.i += 1
        loc = (t.line, t.col)
        self.expect("(")
        if self.accept(")"):
            self.expect(";")
            return SyncWarp("own", (), loc)
        if self.accept("{"):
            first = self.expr()
            if self.accept(".."):
                last = self.expr()
                self.expect("}")
                form, args = "range", (first, last)
            else:
                items = [first]
                while self.accept(","):
                    items.append(self.expr())
                self.expect("}")
                form, args = "set", tuple(items)
        else:
            first = self.expr()
            if self.accept(","):
                form, args = "warp-mask", (first, self.expr())
            else:
                form, args = "mask", (first,)
        self.expect(")")
        self.expect(";")
        return SyncWarp(form, args, loc)

    # expressions
    def expr(self) -> Expr:
        return self.binary(0)

    _LEVELS = (("||",), ("&&",), ("==", "!="), ("<", "<=", ">", ">="), ("+", "-"), ("*", "/", "%"))

    def binary(self, level: int) -> Expr:
        if level == len(self._LEVELS):
            return self.unary()
        lhs = self.binary(level + 1)
        ops = self._LEVELS[level]
        while self.tok.kind == "op" and self.tok.text in ops:
            op = self.tok
            self.i += 1
            rhs = self.binary(level + 1)
            lhs = Binary(op.text, lhs, rhs, (op.line, op.col))
        return lhs

    def unary(self) -> Expr:
        t = self.tok
        if t.kind == "op" and t.text in ("-", "!", "+"):
            self.i += 1
            arg = self.unary()
            if t.text == "+":
                return arg
            if t.text == "-" and isinstance(arg, Inf):
                return Unary("-", arg, (t.line, t.col))
            if t.text == "-" and isinstance(arg, Num):
                return Num(-arg.value, arg.is_int, (t.line, t.col))
            return Unary(t.text, arg, (t.line, t.col))
        return self.primary()

    def primary(self) -> Expr:
        t = self.tok
        loc = (t.line, t.col)
        if t.kind == "num":
            self.i += 1
            v, is_int = _parse_number(t.text)
            return Num(v, is_int, loc)
        if self.accept("("):
            e = self.expr()
            self.expect(")")
            return e
        if t.kind == "id" and t.text not in KEYWORDS:
            self.i += 1
            if t.text in ("inf", "INFINITY"):
                return Inf(loc)
            if self.accept("("):
                args = []
                if not self.at(")"):
                    args.append(self.expr())
                    while self.accept(","):
                        args.append(self.expr())
                self.expect(")")
                if t.text not in DATA_FUNCS:
                    raise KernelSyntaxError(f"unknown function {t.text!r}", *loc)
                arity = DATA_FUNCS[t.text]
                if (arity > 0 and len(args) != arity) or (arity < 0 and len(args) < -arity):
                    raise KernelSyntaxError(f"wrong number of arguments to {t.text}", *loc)
                return Call(t.text, tuple(args), loc)
            if self.accept("["):
                idx = self.expr()
                self.expect("]")
                return Index(t.text, idx, loc)
            return Name(t.text, loc)
        if t.kind == "eof":
            self.error("unexpected end of input in expression")
        self.error(f"unexpected {t.text!r} in expression")


# ---------------------------------------------------------------------------
# declaration checks
# ---------------------------------------------------------------------------


def _names_in(e: Expr):
    if isinstance(e, Name):
        yield e
    elif isinstance(e, Index):
        yield from _names_in(e.index)
    elif isinstance(e, Unary):
        yield from _names_in(e.arg)
    elif isinstance(e, Binary):
        yield from _names_in(e.a)
        yield from _names_in(e.b)
    elif isinstance(e, Call):
        for a in e.args:
            yield from _names_in(a)


def _arrays_in(e: Expr):
    if isinstance(e, Index):
        yield e
        yield from _arrays_in(e.index)
    elif isinstance(e, Unary):
        yield from _arrays_in(e.arg)
    elif isinstance(e, Binary):
        yield from _arrays_in(e.a)
        yield from _arrays_in(e.b)
    elif isinstance(e, Call):
        for a in e.args:
            yield from _arrays_in(a)


def _check_decls(k: KernelAst) -> None:
    globals_: dict[str, Loc] = {}
    for d in (*k.params, *k.arrays):
        if d.name in globals_ or d.name in BUILTINS:
            raise KernelSyntaxError(f"duplicate declaration of {d.name!r}", *d.loc)
        globals_[d.name] = d.loc
    params = {p.name for p in k.params}
    arrays = {a.name for a in k.arrays}
    for a in k.arrays:
        for n in _names_in(a.size):
            if n.id not in params:
                raise KernelSyntaxError(f"array size may only use parameters, found {n.id!r}", *n.loc)

    def use(e: Expr, scopes: list[dict[str, str]]) -> None:
        for ix in _arrays_in(e):
            if ix.array not in arrays:
                raise KernelSyntaxError(f"undeclared array {ix.array!r}", *ix.loc)
        for n in _names_in(e):
            if n.id in arrays:
                raise KernelSyntaxError(f"array {n.id!r} used without an index", *n.loc)
            if n.id in params or n.id in BUILTINS:
                continue
            if not any(n.id in s for s in scopes):
                raise KernelSyntaxError(f"undeclared identifier {n.id!r}", *n.loc)

    def declare(name: str, kind: str, loc: Loc, scopes: list[dict[str, str]]) -> None:
        if name in globals_ or name in BUILTINS or any(name in s for s in scopes):
            raise KernelSyntaxError(f"duplicate declaration of {name!r}", *loc)
        scopes[-1][name] = kind

    def target(t: Union[Name, Index], scopes) -> None:
        if isinstance(t, Index):
            if t.array not in arrays:
                raise KernelSyntaxError(f"undeclared array {t.array!r}", *t.loc)
            use(t.index, scopes)
        else:
            if t.id in params or t.id in BUILTINS or t.id in arrays:
                raise KernelSyntaxError(f"cannot assign to {t.id!r}", *t.loc)
            if not any(t.id in s for s in scopes):
                raise KernelSyntaxError(f"assignment to undeclared variable {t.id!r}", *t.loc)

    def visit(stmts, scopes: list[dict[str, str]]) -> None:
        for s in stmts:
            if isinstance(s, VarDecl):
                if s.init is not None:
                    use(s.init, scopes)
                declare(s.name, s.kind, s.loc, scopes)
            elif isinstance(s, Assign):
                target(s.target, scopes)
                use(s.value, scopes)
            elif isinstance(s, Block):
                visit(s.stmts, scopes + [{}])
            elif isinstance(s, For):
                use(s.start, scopes)
                inner = scopes + [{}]
                declare(s.var, "int", s.loc, inner)
                use(s.cond, inner)
                use(s.update.value, inner)
                visit((s.body,), inner + [{}])
            elif isinstance(s, If):
                use(s.cond, scopes)
                visit((s.then,), scopes + [{}])
                if s.orelse is not None:
                    visit((s.orelse,), scopes + [{}])
            elif isinstance(s, SyncWarp):
                for a in s.args:
                    use(a, scopes)

    visit(k.body, [{}])


def parse_kernel(text: str) -> KernelAst:
    """Parse kernel source; raise :class:`KernelSyntaxError` on any diagnostic."""
    k = _Parser(text).kernel()
    _check_decls(k)
    return k
