"""Canonical text rendering: parse_text(print_text(e)) == e for valid e."""

from __future__ import annotations

from .ast import Call, Expr, Lit, Value, ValueKind


def render_number(f: float) -> str:
    """Minimal decimal form: integral values drop the fraction, others use
    the shortest float repr (which round-trips exactly)."""
    if f == int(f) and abs(f) < 1e16:
        return str(int(f))
    return repr(f)


def quote_text(s: str) -> str:
    out = s.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n")
    return f'"{out}"'


def _render_literal(v: Value) -> str:
    if v.kind is ValueKind.BOOLEAN:
        return "true" if v.payload else "false"
    if v.kind is ValueKind.NUMBER:
        return render_number(v.payload)
    if v.kind is ValueKind.TEXT:
        return quote_text(v.payload)
    raise ValueError(f"{v.kind.name} cannot appear as a literal")


def print_text(expr: Expr) -> str:
    if isinstance(expr, Lit):
        return _render_literal(expr.value)
    args = ", ".join(print_text(a) for a in expr.args)
    return f"{expr.name}({args})"
