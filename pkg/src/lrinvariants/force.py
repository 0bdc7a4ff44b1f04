"""Force profiles f(t): a small expression language and linear-interpolated tables.

Grammar::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := '-' unary | primary
    primary := NUMBER | 't' | FUNC '(' expr ')' | '(' expr ')'
    FUNC    := 'sin' | 'cos' | 'exp'
"""
from __future__ import annotations

import csv
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Union

import numpy as np

from .errors import ForceDomainError, ForceSyntaxError

FUNCTIONS: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "sin": np.sin,
    "cos": np.cos,
    "exp": np.exp,
}


@dataclass(frozen=True)
class Num:
    value: float

    def evaluate(self, t):
        return np.full(np.shape(t), self.value, dtype=float) if np.ndim(t) else self.value


@dataclass(frozen=True)
class Var:
    def evaluate(self, t):
        return np.asarray(t, dtype=float) if np.ndim(t) else float(t)


@dataclass(frozen=True)
class Neg:
    operand: "Node"

    def evaluate(self, t):
        return -self.operand.evaluate(t)


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Node"
    right: "Node"

    def evaluate(self, t):
        a = self.left.evaluate(t)
        b = self.right.evaluate(t)
        if self.op == "+":
            return a + b
        if self.op == "-":
            return a - b
        if self.op == "*":
            return a * b
        return a / b


@dataclass(frozen=True)
class Call:
    name: str
    arg: "Node"

    def evaluate(self, t):
        return FUNCTIONS[self.name](self.arg.evaluate(t))


Node = Union[Num, Var, Neg, BinOp, Call]

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


def _prec(node: Node) -> int:
    if isinstance(node, BinOp):
        return _PREC[node.op]
    if isinstance(node, Neg):
        return 3
    return 4


def to_source(node: Node) -> str:
    """Print ``node`` with the minimal parentheses that reparse to the same tree."""
    if isinstance(node, Num):
        return repr(float(node.value))
    if isinstance(node, Var):
        return "t"
    if isinstance(node, Call):
        return f"{node.name}({to_source(node.arg)})"
    if isinstance(node, Neg):
        inner = to_source(node.operand)
        if _prec(node.operand) < 3:
            inner = f"({inner})"
        return f"-{inner}"
    p = _PREC[node.op]
    left = to_source(node.left)
    right = to_source(node.right)
    if _prec(node.left) < p:
        left = f"({left})"
    # everything is left-associative, so an equal-precedence right child needs parens
    if _prec(node.right) <= p:
        right = f"({right})"
    return f"{left} {node.op} {right}"


_TOKEN = re.compile(
    r"(?P<ws>[ \t\r]+)|(?P<nl>\n)"
    r"|(?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/()])"
)


@dataclass
class _Token:
    kind: str
    text: str
    line: int
    column: int


def _tokenize(src: str) -> list[_Token]:
    tokens = []
    pos, line, line_start = 0, 1, 0
    while pos < len(src):
        m = _TOKEN.match(src, pos)
        if m is None:
            raise ForceSyntaxError(f"unexpected character {src[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind != "ws":
            tokens.append(_Token(kind, m.group(), line, pos - line_start + 1))
        pos = m.end()
    tokens.append(_Token("end", "", line, pos - line_start + 1))
    return tokens


class _Parser:
    def __init__(self, src: str):
        self.tokens = _tokenize(src)
        self.i = 0

    @property
    def tok(self) -> _Token:
        return self.tokens[self.i]

    def error(self, message: str, tok: _Token | None = None):
        tok = tok or self.tok
        raise ForceSyntaxError(message, tok.line, tok.column)

    def advance(self) -> _Token:
        tok = self.tok
        self.i += 1
        return tok

    def expect(self, text: str):
        if self.tok.text != text:
            found = "end of input" if self.tok.kind == "end" else repr(self.tok.text)
            self.error(f"expected {text!r}, found {found}")
        self.advance()

    def parse(self) -> Node:
        node = self.expr()
        if self.tok.kind != "end":
            self.error(f"unexpected {self.tok.text!r}")
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.tok.text in ("+", "-") and self.tok.kind == "op":
            op = self.advance().text
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.unary()
        while self.tok.text in ("*", "/") and self.tok.kind == "op":
            op = self.advance().text
            node = BinOp(op, node, self.unary())
        return node

    def unary(self) -> Node:
        if self.tok.kind == "op" and self.tok.text == "-":
            self.advance()
            return Neg(self.unary())
        return self.primary()

    def primary(self) -> Node:
        tok = self.tok
        if tok.kind == "num":
            self.advance()
            value = float(tok.text)
            if not np.isfinite(value):
                self.error(f"literal {tok.text} is not a finite number", tok)
            return Num(value)
        if tok.kind == "ident":
            self.advance()
            if tok.text == "t":
                return Var()
            if tok.text in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(tok.text, arg)
            self.error(f"unknown identifier {tok.text!r}", tok)
        if tok.text == "(":
            self.advance()
            node = self.expr()
            self.expect(")")
            return node
        if tok.kind == "end":
            self.error("unexpected end of input")
        self.error(f"unexpected {tok.text!r}")


def parse_expression(src: str) -> Node:
    """Parse ``src`` into an AST, raising :class:`ForceSyntaxError` with a position."""
    return _Parser(src).parse()


class ForceProfile:
    """f(t) given either as an expression or as a (t, f) table.

    Table profiles interpolate linearly and refuse queries outside their span.
    """

    def __init__(self, kind: str, source: str | None = None, ast: Node | None = None,
                 table: tuple[np.ndarray, np.ndarray] | None = None):
        self.kind = kind
        self.source = source
        self.ast = ast
        self.table = table

    @classmethod
    def from_expression(cls, src: str) -> "ForceProfile":
        return cls("expression", source=src, ast=parse_expression(src))

    @classmethod
    def constant(cls, value: float) -> "ForceProfile":
        return cls.from_expression(repr(float(value)))

    @classmethod
    def from_table(cls, t, f) -> "ForceProfile":
        t = np.asarray(t, dtype=float)
        f = np.asarray(f, dtype=float)
        if t.ndim != 1 or t.shape != f.shape or len(t) < 2:
            raise ValueError("force table needs two equal-length columns with at least two rows")
        if np.any(np.diff(t) <= 0):
            raise ValueError("force table times must be strictly increasing")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(f))):
            raise ValueError("force table contains non-finite values")
        t.setflags(write=False)
        f.setflags(write=False)
        return cls("table", table=(t, f))

    @classmethod
    def from_csv(cls, path: str | Path) -> "ForceProfile":
        rows = []
        with open(path, newline="") as fh:
            for row in csv.reader(fh):
                if not row or row[0].lstrip().startswith("#"):
                    continue
                try:
                    rows.append((float(row[0]), float(row[1])))
                except ValueError:
                    if rows:
                        raise
                    continue  # header line
        prof = cls.from_table(*zip(*rows)) if rows else None
        if prof is None:
            raise ValueError(f"force table {path} has no data rows")
        prof.source = str(path)
        return prof

    @property
    def span(self) -> tuple[float, float]:
        if self.kind == "table":
            return float(self.table[0][0]), float(self.table[0][-1])
        return -np.inf, np.inf

    @property
    def breakpoints(self) -> np.ndarray:
        """Times where f is not smooth (table knots); empty for expressions."""
        return self.table[0] if self.kind == "table" else np.empty(0)

    def covers(self, t0: float, t1: float) -> bool:
        lo, hi = self.span
        return lo <= t0 and t1 <= hi

    def __call__(self, t):
        if self.kind == "expression":
            return self.ast.evaluate(t)
        ts, fs = self.table
        tt = np.asarray(t, dtype=float)
        if np.any(tt < ts[0]) or np.any(tt > ts[-1]):
            raise ForceDomainError(
                f"force table covers [{ts[0]}, {ts[-1]}], queried outside it"
            )
        out = np.interp(tt, ts, fs)
        return float(out) if np.ndim(t) == 0 else out

    def describe(self) -> str:
        if self.kind == "expression":
            return to_source(self.ast)
        return f"table:{self.source or '<memory>'}"

    def __repr__(self) -> str:
        return f"ForceProfile({self.describe()!r})"


def parse_force(src: str) -> ForceProfile:
    """Parse a force expression in ``t``; raises :class:`ForceSyntaxError` with a position."""
    return ForceProfile.from_expression(src)
