"""Value universe and AST nodes for the expression DSL.

A Value is one of five variants: Boolean, Number (finite 64-bit float),
Text, Timestamp (integer Unix seconds, UTC), or Undefined. Undefined is
the absorbing "no answer" element: it carries no payload and is produced
whenever a context reference is missing or an operation cannot yield a
meaningful result.

Expressions are trees of catalog function calls over literals. Literals
are restricted to Boolean, Number, and Text; timestamps only ever enter a
tree through functions like now() or timestampWithOffset().
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Union

MAX_DEPTH = 32


class ValueKind(Enum):
    BOOLEAN = "bool"
    NUMBER = "num"
    TEXT = "str"
    TIMESTAMP = "ts"
    UNDEFINED = "undef"


@dataclass(frozen=True)
class Value:
    """Tagged runtime value. Use the factory helpers, not the constructor."""

    kind: ValueKind
    payload: bool | float | str | int | None = None

    @staticmethod
    def boolean(b: bool) -> "Value":
        return TRUE if b else FALSE

    @staticmethod
    def number(n: float) -> "Value":
        f = float(n)
        if not math.isfinite(f):
            raise ValueError("Number values must be finite")
        return Value(ValueKind.NUMBER, f)

    @staticmethod
    def text(s: str) -> "Value":
        return Value(ValueKind.TEXT, str(s))

    @staticmethod
    def timestamp(t: int) -> "Value":
        return Value(ValueKind.TIMESTAMP, int(t))

    @property
    def is_undefined(self) -> bool:
        return self.kind is ValueKind.UNDEFINED

    def __repr__(self) -> str:  # compact, for test failures
        if self.kind is ValueKind.UNDEFINED:
            return "Undefined"
        return f"{self.kind.name.title()}({self.payload!r})"


TRUE = Value(ValueKind.BOOLEAN, True)
FALSE = Value(ValueKind.BOOLEAN, False)
UNDEFINED = Value(ValueKind.UNDEFINED)

# Kinds a Lit node may carry.
LITERAL_KINDS = (ValueKind.BOOLEAN, ValueKind.NUMBER, ValueKind.TEXT)


@dataclass(frozen=True)
class Lit:
    value: Value

    def __post_init__(self):
        if self.value.kind not in LITERAL_KINDS:
            raise ValueError(f"literal cannot hold {self.value.kind.name}")


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple["Expr", ...]


Expr = Union[Lit, Call]


def lit(raw: bool | int | float | str) -> Lit:
    """Build a literal from a plain Python scalar (bool checked before int)."""
    if isinstance(raw, bool):
        return Lit(Value.boolean(raw))
    if isinstance(raw, (int, float)):
        return Lit(Value.number(raw))
    if isinstance(raw, str):
        return Lit(Value.text(raw))
    raise TypeError(f"no literal for {type(raw).__name__}")


def call(name: str, *args: Expr) -> Call:
    return Call(name, tuple(args))


def depth_of(expr: Expr) -> int:
    """Tree depth: a leaf counts 1, each call level adds 1."""
    if isinstance(expr, Lit):
        return 1
    if not expr.args:
        return 1
    return 1 + max(depth_of(a) for a in expr.args)


def walk(expr: Expr, path: str = ""):
    """Yield (path, node) pairs in pre-order. Root path is ''."""
    yield path, expr
    if isinstance(expr, Call):
        for i, arg in enumerate(expr.args):
            child = f"{path}.args[{i}]" if path else f"args[{i}]"
            yield from walk(arg, child)
