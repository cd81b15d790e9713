"""Pratt parser for the expression language.

Grammar: numbers, declared variables, ``+ - * / ^``, unary minus,
parentheses and calls ``exp(..) log(..) sin(..) cos(..) sqrt(..)``.
``^`` is right-associative and binds tighter than unary minus, so
``-x^2`` is ``-(x^2)``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable

from contact_hj.errors import ExprSyntaxError, UnknownIdentifierError
from contact_hj.expr.nodes import FUNCTIONS, Binary, Const, Expr, Unary, Var

_TOKEN = re.compile(
    r"\s*(?:"
    r"(?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),])"
    r")"
)

_LBP = {"+": 10, "-": 10, "*": 20, "/": 20, "^": 30}
_UNARY_MINUS_RBP = 25


@dataclass(frozen=True)
class Token:
    kind: str  # number | name | op | end
    text: str
    offset: int


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            bad = pos + (len(text[pos:]) - len(text[pos:].lstrip()))
            raise ExprSyntaxError(f"unexpected character {text[bad]!r}", bad)
        kind = m.lastgroup or "op"
        tokens.append(Token(kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(Token("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, variables: Iterable[str]) -> None:
        self.tokens = tokenize(text)
        self.pos = 0
        self.variables = frozenset(variables)

    @property
    def token(self) -> Token:
        return self.tokens[self.pos]

    def advance(self) -> Token:
        tok = self.tokens[self.pos]
        if tok.kind != "end":
            self.pos += 1
        return tok

    def expect(self, text: str) -> Token:
        tok = self.token
        if tok.kind != "op" or tok.text != text:
            found = "end of input" if tok.kind == "end" else repr(tok.text)
            raise ExprSyntaxError(f"expected {text!r}, found {found}", tok.offset)
        return self.advance()

    def lbp(self, tok: Token) -> int:
        if tok.kind == "op":
            return _LBP.get(tok.text, 0)
        return 0

    def expression(self, rbp: int = 0) -> Expr:
        left = self.nud(self.advance())
        while rbp < self.lbp(self.token):
            left = self.led(self.advance(), left)
        return left

    def nud(self, tok: Token) -> Expr:
        if tok.kind == "number":
            return Const(float(tok.text))
        if tok.kind == "name":
            return self.name(tok)
        if tok.kind == "op" and tok.text == "-":
            return Unary("neg", self.expression(_UNARY_MINUS_RBP))
        if tok.kind == "op" and tok.text == "+":
            return self.expression(_UNARY_MINUS_RBP)
        if tok.kind == "op" and tok.text == "(":
            inner = self.expression()
            self.expect(")")
            return inner
        if tok.kind == "end":
            raise ExprSyntaxError("unexpected end of input", tok.offset)
        raise ExprSyntaxError(f"unexpected {tok.text!r}", tok.offset)

    def led(self, tok: Token, left: Expr) -> Expr:
        op = tok.text
        if op == "^":
            return Binary("^", left, self.expression(_LBP["^"] - 1))
        return Binary(op, left, self.expression(_LBP[op]))

    def name(self, tok: Token) -> Expr:
        following = self.token
        if tok.text in FUNCTIONS and following.kind == "op" and following.text == "(":
            self.advance()
            arg = self.expression()
            self.expect(")")
            return Unary(tok.text, arg)
        if tok.text in self.variables:
            return Var(tok.text)
        raise UnknownIdentifierError(tok.text, tok.offset)

    def parse(self) -> Expr:
        result = self.expression()
        if self.token.kind != "end":
            raise ExprSyntaxError(f"unexpected {self.token.text!r}", self.token.offset)
        return result


def parse(text: str, variables: Iterable[str]) -> Expr:
    """Parse ``text`` into an expression over ``variables``."""
    return _Parser(text, variables).parse()
