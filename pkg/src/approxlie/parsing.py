"""Recursive-descent parser for the expression grammar.

Grammar (``^`` binds tighter than unary minus)::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := '-' unary | '+' unary | power
    power   := atom ('^' exponent)?
    exponent:= ['-' | '+'] INT | '(' ['-' | '+'] INT ')'
    atom    := NUMBER | IDENT | FUNC '(' expr ')' | 'diff' '(' IDENT ',' IDENT [',' INT] ')'
             | '(' expr ')'

``diff(u, x, k)`` is read as the jet indeterminate ``u<k>`` (``u1`` for the
first derivative).
"""

from __future__ import annotations

import re
from typing import Iterable, NamedTuple

from .expr import FUNCTIONS, Expr, ExpressionError, add, const, func, mul, neg, power, sub, var

__all__ = ["ParseError", "UnknownIdentifierError", "parse", "jet_name"]


class ParseError(ExpressionError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at position {position}")
        self.position = position


class UnknownIdentifierError(ParseError):
    pass


class _Tok(NamedTuple):
    kind: str
    text: str
    pos: int


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^(),=])
    """,
    re.VERBOSE,
)


def _tokenize(text: str) -> list[_Tok]:
    toks = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        if kind != "ws":
            toks.append(_Tok(kind, m.group(), pos))
        pos = m.end()
    toks.append(_Tok("end", "", len(text)))
    return toks


def jet_name(dep: str, k: int) -> str:
    """Variable name of the k-th derivative indeterminate of ``dep``."""
    return dep if k == 0 else f"{dep}{k}"


class _Parser:
    def __init__(self, text: str, variables: Iterable[str], dependent: str | None,
                 independent: str | None):
        self.toks = _tokenize(text)
        self.i = 0
        self.vars = set(variables)
        self.dep = dependent
        self.indep = independent

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def take(self, kind=None, text=None) -> _Tok:
        t = self.tok
        if (kind and t.kind != kind) or (text and t.text != text):
            want = text or kind
            got = t.text or "end of input"
            raise ParseError(f"expected {want!r}, got {got!r}", t.pos)
        self.i += 1
        return t

    def accept(self, text) -> bool:
        if self.tok.kind == "op" and self.tok.text == text:
            self.i += 1
            return True
        return False

    def parse(self) -> Expr:
        e = self.expr()
        if self.accept("="):
            e = sub(e, self.expr())
        if self.tok.kind != "end":
            raise ParseError(f"unexpected token {self.tok.text!r}", self.tok.pos)
        return e

    def expr(self) -> Expr:
        terms = [self.term()]
        while self.tok.kind == "op" and self.tok.text in "+-":
            op = self.take().text
            t = self.term()
            terms.append(t if op == "+" else neg(t))
        return add(*terms) if len(terms) > 1 else terms[0]

    def term(self) -> Expr:
        e = self.unary()
        while self.tok.kind == "op" and self.tok.text in "*/":
            op = self.take().text
            rhs = self.unary()
            e = mul(e, rhs) if op == "*" else mul(e, power(rhs, -1))
        return e

    def unary(self) -> Expr:
        if self.accept("-"):
            return neg(self.unary())
        if self.accept("+"):
            return self.unary()
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.accept("^"):
            return power(base, self.exponent())
        return base

    def exponent(self) -> int:
        paren = self.accept("(")
        sign = 1
        if self.accept("-"):
            sign = -1
        else:
            self.accept("+")
        t = self.tok
        if t.kind != "num" or not re.fullmatch(r"\d+", t.text):
            raise ParseError("exponent must be an integer literal", t.pos)
        self.i += 1
        if paren:
            self.take("op", ")")
        return sign * int(t.text)

    def atom(self) -> Expr:
        t = self.tok
        if t.kind == "num":
            self.i += 1
            return const(float(t.text))
        if t.kind == "op" and t.text == "(":
            self.i += 1
            e = self.expr()
            self.take("op", ")")
            return e
        if t.kind == "ident":
            self.i += 1
            if t.text == "diff":
                return self.derivative(t)
            if t.text in FUNCTIONS:
                self.take("op", "(")
                arg = self.expr()
                self.take("op", ")")
                return func(t.text, arg)
            if t.text in self.vars:
                return var(t.text)
            raise UnknownIdentifierError(f"unknown identifier {t.text!r}", t.pos)
        raise ParseError(f"unexpected token {t.text or 'end of input'!r}", t.pos)

    def derivative(self, head: _Tok) -> Expr:
        if self.dep is None:
            raise UnknownIdentifierError("derivatives are not allowed here", head.pos)
        self.take("op", "(")
        d = self.take("ident")
        if d.text != self.dep:
            raise UnknownIdentifierError(f"unknown dependent variable {d.text!r}", d.pos)
        self.take("op", ",")
        x = self.take("ident")
        if x.text != self.indep:
            raise UnknownIdentifierError(f"unknown independent variable {x.text!r}", x.pos)
        k = 1
        if self.accept(","):
            n = self.take("num")
            if not re.fullmatch(r"\d+", n.text) or int(n.text) < 1:
                raise ParseError("derivative order must be a positive integer", n.pos)
            k = int(n.text)
        self.take("op", ")")
        return var(jet_name(self.dep, k))


def parse(text: str, vars: Iterable[str], *, dependent: str | None = None,
          independent: str | None = None) -> Expr:
    """Parse ``text`` into an expression over ``vars``.

    With ``dependent``/``independent`` given, ``diff(u, x, k)`` is accepted
    and mapped to the jet indeterminate named by :func:`jet_name`. An
    equation ``lhs = rhs`` parses to ``lhs - rhs``.
    """
    return _Parser(text, vars, dependent, independent).parse()
