"""Guard and rate expressions over markings.

Grammar (loosest binding first)::

    expr    := or
    or      := and ("or" and)*
    and     := not ("and" not)*
    not     := "not" not | cmp
    cmp     := sum (("=="|"!="|"<"|"<="|">"|">=") sum)?
    sum     := term (("+"|"-") term)*
    term    := unary (("*"|"/") unary)*
    unary   := "-" unary | atom
    atom    := NUMBER | "true" | "false" | NAME | "#" NAME
             | ("min"|"max") "(" expr ("," expr)* ")" | "(" expr ")"

``NAME`` is a parameter reference, ``#NAME`` the token count of a place.
Expressions are parsed once into a small AST and compiled to closures that
take a dense marking (tuple indexed by place position) and a parameter map.
"""

from __future__ import annotations

import math
import operator
import re
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence, Union

from .errors import ExpressionError

KEYWORDS = frozenset({"and", "or", "not", "min", "max", "true", "false"})

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<place>\#[A-Za-z_][A-Za-z0-9_]*)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>==|!=|<=|>=|<|>|\+|-|\*|/|\(|\)|,)
    """,
    re.VERBOSE,
)


# -- AST ---------------------------------------------------------------------

@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Bool:
    value: bool


@dataclass(frozen=True)
class Param:
    name: str


@dataclass(frozen=True)
class Tokens:
    place: str


@dataclass(frozen=True)
class Unary:
    op: str
    operand: "Node"


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Call:
    func: str
    args: tuple["Node", ...]


Node = Union[Num, Bool, Param, Tokens, Unary, Binary, Call]

_PRECEDENCE = {
    "or": 1, "and": 2,
    "==": 4, "!=": 4, "<": 4, "<=": 4, ">": 4, ">=": 4,
    "+": 5, "-": 5, "*": 6, "/": 6,
}


def _tokenize(text: str) -> list[tuple[str, str]]:
    pos = 0
    out = []
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ExpressionError(f"unexpected character {text[pos]!r} in {text!r}")
        pos = m.end()
        kind = m.lastgroup
        if kind == "ws":
            continue
        value = m.group()
        if kind == "name" and value in KEYWORDS:
            kind = "kw"
        out.append((kind, value))
    out.append(("end", ""))
    return out


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def take(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def expect(self, value):
        kind, v = self.take()
        if v != value:
            raise ExpressionError(f"expected {value!r} but found {v or 'end of input'!r} in {self.text!r}")

    def parse(self) -> Node:
        node = self.parse_or()
        if self.peek()[0] != "end":
            raise ExpressionError(f"unexpected {self.peek()[1]!r} in {self.text!r}")
        return node

    def parse_or(self):
        node = self.parse_and()
        while self.peek() == ("kw", "or"):
            self.take()
            node = Binary("or", node, self.parse_and())
        return node

    def parse_and(self):
        node = self.parse_not()
        while self.peek() == ("kw", "and"):
            self.take()
            node = Binary("and", node, self.parse_not())
        return node

    def parse_not(self):
        if self.peek() == ("kw", "not"):
            self.take()
            return Unary("not", self.parse_not())
        return self.parse_cmp()

    def parse_cmp(self):
        node = self.parse_sum()
        kind, v = self.peek()
        if kind == "op" and v in ("==", "!=", "<", "<=", ">", ">="):
            self.take()
            node = Binary(v, node, self.parse_sum())
            if self.peek()[1] in ("==", "!=", "<", "<=", ">", ">="):
                raise ExpressionError(f"chained comparison in {self.text!r}")
        return node

    def parse_sum(self):
        node = self.parse_term()
        while self.peek() in (("op", "+"), ("op", "-")):
            op = self.take()[1]
            node = Binary(op, node, self.parse_term())
        return node

    def parse_term(self):
        node = self.parse_unary()
        while self.peek() in (("op", "*"), ("op", "/")):
            op = self.take()[1]
            node = Binary(op, node, self.parse_unary())
        return node

    def parse_unary(self):
        if self.peek() == ("op", "-"):
            self.take()
            return Unary("-", self.parse_unary())
        return self.parse_atom()

    def parse_atom(self):
        kind, v = self.take()
        if kind == "num":
            return Num(float(v))
        if kind == "place":
            return Tokens(v[1:])
        if kind == "name":
            return Param(v)
        if kind == "kw" and v in ("true", "false"):
            return Bool(v == "true")
        if kind == "kw" and v in ("min", "max"):
            self.expect("(")
            args = [self.parse_or()]
            while self.peek() == ("op", ","):
                self.take()
                args.append(self.parse_or())
            self.expect(")")
            return Call(v, tuple(args))
        if (kind, v) == ("op", "("):
            node = self.parse_or()
            self.expect(")")
            return node
        raise ExpressionError(f"unexpected {v or 'end of input'!r} in {self.text!r}")


# -- unparsing ---------------------------------------------------------------

def _fmt_num(x: float) -> str:
    if x == int(x) and abs(x) < 1e15:
        return str(int(x))
    return repr(x)


def unparse(node: Node, parent: int = 0) -> str:
    """Canonical text for ``node``; re-parsing it yields an equal AST."""
    if isinstance(node, Num):
        return _fmt_num(node.value)
    if isinstance(node, Bool):
        return "true" if node.value else "false"
    if isinstance(node, Param):
        return node.name
    if isinstance(node, Tokens):
        return "#" + node.place
    if isinstance(node, Call):
        return f"{node.func}({', '.join(unparse(a) for a in node.args)})"
    if isinstance(node, Unary):
        if node.op == "not":
            text = "not " + unparse(node.operand, 3)
            return f"({text})" if parent > 3 else text
        return "-" + unparse(node.operand, 7)
    prec = _PRECEDENCE[node.op]
    # left-associative: the right operand needs parens at equal precedence
    left_prec = prec + 1 if node.op in _CMP else prec
    text = f"{unparse(node.left, left_prec)} {node.op} {unparse(node.right, prec + 1)}"
    return f"({text})" if prec < parent else text


# -- compilation -------------------------------------------------------------

Evaluator = Callable[[Sequence[int], Mapping[str, float]], Union[float, bool]]

_ARITH = {"+": operator.add, "-": operator.sub, "*": operator.mul}
_CMP = {
    "==": operator.eq, "!=": operator.ne, "<": operator.lt,
    "<=": operator.le, ">": operator.gt, ">=": operator.ge,
}


def _num(v, ctx):
    if isinstance(v, bool):
        raise ExpressionError(f"boolean used where a number is expected in {ctx}")
    return v


def _bool(v, ctx):
    if not isinstance(v, bool):
        raise ExpressionError(f"number used where a boolean is expected in {ctx}")
    return v


def _compile(node: Node, place_index: Mapping[str, int], ctx: str) -> Evaluator:
    if isinstance(node, Num):
        value = node.value
        return lambda m, p: value
    if isinstance(node, Bool):
        flag = node.value
        return lambda m, p: flag
    if isinstance(node, Tokens):
        try:
            idx = place_index[node.place]
        except KeyError:
            raise ExpressionError(f"unknown place {node.place} in {ctx}") from None
        return lambda m, p: m[idx]
    if isinstance(node, Param):
        name = node.name

        def param(m, p):
            try:
                return p[name]
            except KeyError:
                raise ExpressionError(f"unknown parameter {name} in {ctx}") from None
        return param
    if isinstance(node, Call):
        args = [_compile(a, place_index, ctx) for a in node.args]
        fn = min if node.func == "min" else max
        return lambda m, p: fn(_num(a(m, p), ctx) for a in args)
    if isinstance(node, Unary):
        inner = _compile(node.operand, place_index, ctx)
        if node.op == "not":
            return lambda m, p: not _bool(inner(m, p), ctx)
        return lambda m, p: -_num(inner(m, p), ctx)

    left = _compile(node.left, place_index, ctx)
    right = _compile(node.right, place_index, ctx)
    op = node.op
    if op == "and":
        return lambda m, p: _bool(left(m, p), ctx) and _bool(right(m, p), ctx)
    if op == "or":
        return lambda m, p: _bool(left(m, p), ctx) or _bool(right(m, p), ctx)
    if op == "/":
        def div(m, p):
            den = _num(right(m, p), ctx)
            if den == 0:
                raise ExpressionError(f"division by zero in {ctx}")
            return _num(left(m, p), ctx) / den
        return div
    if op in _CMP:
        f = _CMP[op]
        return lambda m, p: f(_num(left(m, p), ctx), _num(right(m, p), ctx))
    f = _ARITH[op]
    return lambda m, p: f(_num(left(m, p), ctx), _num(right(m, p), ctx))


@dataclass(frozen=True)
class Expression:
    """A parsed expression. Equality is structural (on the AST)."""

    ast: Node

    @classmethod
    def parse(cls, text: str) -> "Expression":
        return cls(_Parser(str(text)).parse())

    @classmethod
    def const(cls, value: float | bool) -> "Expression":
        if isinstance(value, bool):
            return cls(Bool(value))
        if value < 0:
            return cls(Unary("-", Num(-float(value))))
        return cls(Num(float(value)))

    def __str__(self) -> str:
        return unparse(self.ast)

    def places(self) -> set[str]:
        return {n.place for n in _walk(self.ast) if isinstance(n, Tokens)}

    def params(self) -> set[str]:
        return {n.name for n in _walk(self.ast) if isinstance(n, Param)}

    @property
    def constant(self) -> float | bool | None:
        """The literal value when the expression is a bare literal."""
        if isinstance(self.ast, (Num, Bool)):
            return self.ast.value
        return None

    def compile(self, place_index: Mapping[str, int]) -> Evaluator:
        return _compile(self.ast, place_index, repr(str(self)))


def _walk(node: Node):
    yield node
    if isinstance(node, Unary):
        yield from _walk(node.operand)
    elif isinstance(node, Binary):
        yield from _walk(node.left)
        yield from _walk(node.right)
    elif isinstance(node, Call):
        for a in node.args:
            yield from _walk(a)


def as_expression(value) -> Expression:
    if isinstance(value, Expression):
        return value
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return Expression.const(value)
    if isinstance(value, bool):
        return Expression.const(value)
    return Expression.parse(value)


def is_finite_number(v) -> bool:
    return not isinstance(v, bool) and math.isfinite(v)
