"""Recursive-descent parser for the expression DSL text form.

Grammar (whitespace-insensitive between tokens):

    expr    := call | literal
    call    := ident "(" [expr ("," expr)*] ")"
    literal := number | string | "true" | "false"

Identifiers match [A-Za-z_][A-Za-z0-9_]*. Strings are double-quoted and
support the escapes \\" \\\\ \\n. Numbers take an optional leading minus,
decimal digits, an optional fraction, and an optional exponent.

The parser also enforces the catalog: unknown names, illegal arity, and
trees beyond the depth limit are rejected here, so a parsed expression is
always valid.
"""

from __future__ import annotations

import math

from .ast import MAX_DEPTH, Call, Expr, Lit, Value
from .catalog import CATALOG, FunctionSpec
from .errors import (
    ArityMismatchError,
    DepthExceededError,
    ExpressionSyntaxError,
    UnknownFunctionError,
)

_IDENT_FIRST = set("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ_")
_IDENT_REST = _IDENT_FIRST | set("0123456789")
_DIGITS = set("0123456789")

_ESCAPES = {'"': '"', "\\": "\\", "n": "\n"}


class _Parser:
    def __init__(self, source: str, catalog: dict[str, FunctionSpec]):
        self.src = source
        self.pos = 0
        self.catalog = catalog

    # -- character helpers -------------------------------------------------

    def _peek(self) -> str:
        return self.src[self.pos] if self.pos < len(self.src) else ""

    def _skip_ws(self) -> None:
        while self.pos < len(self.src) and self.src[self.pos].isspace():
            self.pos += 1

    def _fail(self, expected: str, at: int | None = None):
        raise ExpressionSyntaxError(self.pos if at is None else at, expected)

    # -- grammar -----------------------------------------------------------

    def parse(self) -> Expr:
        expr = self._expression(depth=1)
        self._skip_ws()
        if self.pos != len(self.src):
            self._fail("end of input")
        return expr

    def _expression(self, depth: int) -> Expr:
        if depth > MAX_DEPTH:
            raise DepthExceededError(MAX_DEPTH)
        self._skip_ws()
        c = self._peek()
        if not c:
            self._fail("expression")
        if c == '"':
            return Lit(Value.text(self._string()))
        if c in _DIGITS or c == "-":
            return Lit(Value.number(self._number()))
        if c in _IDENT_FIRST:
            start = self.pos
            name = self._ident()
            if name == "true":
                return Lit(Value.boolean(True))
            if name == "false":
                return Lit(Value.boolean(False))
            return self._call(name, start, depth)
        self._fail("expression")

    def _call(self, name: str, name_pos: int, depth: int) -> Call:
        self._skip_ws()
        if self._peek() != "(":
            self._fail("'('")
        self.pos += 1
        args: list[Expr] = []
        self._skip_ws()
        if self._peek() == ")":
            self.pos += 1
        else:
            while True:
                args.append(self._expression(depth + 1))
                self._skip_ws()
                c = self._peek()
                if c == ",":
                    self.pos += 1
                    continue
                if c == ")":
                    self.pos += 1
                    break
                self._fail("',' or ')'")
        spec = self.catalog.get(name)
        if spec is None:
            raise UnknownFunctionError(name, f"offset {name_pos}")
        if not spec.arity_ok(len(args)):
            raise ArityMismatchError(
                name, len(args), spec.arity_text(), f"offset {name_pos}"
            )
        return Call(name, tuple(args))

    # -- tokens ------------------------------------------------------------

    def _ident(self) -> str:
        start = self.pos
        self.pos += 1
        while self._peek() in _IDENT_REST:
            self.pos += 1
        return self.src[start : self.pos]

    def _number(self) -> float:
        start = self.pos
        if self._peek() == "-":
            self.pos += 1
        if self._peek() not in _DIGITS:
            self._fail("digit")
        while self._peek() in _DIGITS:
            self.pos += 1
        if self._peek() == ".":
            self.pos += 1
            if self._peek() not in _DIGITS:
                self._fail("digit after '.'")
            while self._peek() in _DIGITS:
                self.pos += 1
        if self._peek() in ("e", "E"):
            self.pos += 1
            if self._peek() in ("+", "-"):
                self.pos += 1
            if self._peek() not in _DIGITS:
                self._fail("exponent digit")
            while self._peek() in _DIGITS:
                self.pos += 1
        value = float(self.src[start : self.pos])
        if not math.isfinite(value):
            self._fail("number within range", at=start)
        return value

    def _string(self) -> str:
        self.pos += 1  # opening quote
        out: list[str] = []
        while True:
            if self.pos >= len(self.src):
                self._fail("closing '\"'")
            c = self.src[self.pos]
            if c == '"':
                self.pos += 1
                return "".join(out)
            if c == "\\":
                self.pos += 1
                esc = self._peek()
                if esc not in _ESCAPES:
                    self._fail("escape: one of \\\" \\\\ \\n")
                out.append(_ESCAPES[esc])
                self.pos += 1
                continue
            out.append(c)
            self.pos += 1


def parse_text(source: str, catalog: dict[str, FunctionSpec] = CATALOG) -> Expr:
    """Parse expression text into a validated AST."""
    return _Parser(source, catalog).parse()
