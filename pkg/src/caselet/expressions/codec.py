"""Canonical JSON document encoding for expressions.

Call  -> {"name": <text>, "args": [<arg>...]}
Lit   -> {"num": <number>} | {"str": <text>} | {"bool": <bool>}

encode() returns plain JSON-serializable objects with stable field order
(name before args); decode() validates against the catalog exactly like
the text parser, so a decoded expression is always valid.
"""

from __future__ import annotations

from .ast import MAX_DEPTH, Call, Expr, Lit, Value, ValueKind
from .catalog import CATALOG, FunctionSpec
from .errors import (
    ArityMismatchError,
    DepthExceededError,
    MalformedDocumentError,
    UnknownFunctionError,
)


def encode(expr: Expr) -> dict:
    if isinstance(expr, Lit):
        v = expr.value
        if v.kind is ValueKind.BOOLEAN:
            return {"bool": v.payload}
        if v.kind is ValueKind.TEXT:
            return {"str": v.payload}
        f = v.payload
        return {"num": int(f) if f == int(f) and abs(f) < 1e16 else f}
    return {"name": expr.name, "args": [encode(a) for a in expr.args]}


def _decode_node(doc, path: str, depth: int, catalog: dict[str, FunctionSpec]) -> Expr:
    if depth > MAX_DEPTH:
        raise DepthExceededError(MAX_DEPTH)
    if not isinstance(doc, dict):
        raise MalformedDocumentError(f"expected object at {path or 'root'}")
    if "name" in doc:
        name = doc["name"]
        if not isinstance(name, str):
            raise MalformedDocumentError(f"'name' must be text at {path or 'root'}")
        raw_args = doc.get("args", [])
        if not isinstance(raw_args, list):
            raise MalformedDocumentError(f"'args' must be a list at {path or 'root'}")
        args = tuple(
            _decode_node(a, f"{path}.args[{i}]" if path else f"args[{i}]", depth + 1, catalog)
            for i, a in enumerate(raw_args)
        )
        spec = catalog.get(name)
        if spec is None:
            raise UnknownFunctionError(name, path)
        if not spec.arity_ok(len(args)):
            raise ArityMismatchError(name, len(args), spec.arity_text(), path)
        return Call(name, args)
    if "bool" in doc:
        if not isinstance(doc["bool"], bool):
            raise MalformedDocumentError(f"'bool' must be true/false at {path or 'root'}")
        return Lit(Value.boolean(doc["bool"]))
    if "str" in doc:
        if not isinstance(doc["str"], str):
            raise MalformedDocumentError(f"'str' must be text at {path or 'root'}")
        return Lit(Value.text(doc["str"]))
    if "num" in doc:
        n = doc["num"]
        if isinstance(n, bool) or not isinstance(n, (int, float)):
            raise MalformedDocumentError(f"'num' must be a number at {path or 'root'}")
        try:
            return Lit(Value.number(n))
        except ValueError as e:
            raise MalformedDocumentError(f"{e} at {path or 'root'}") from None
    raise MalformedDocumentError(
        f"expected one of name/num/str/bool at {path or 'root'}"
    )


def decode(doc, catalog: dict[str, FunctionSpec] = CATALOG) -> Expr:
    return _decode_node(doc, "", 1, catalog)


def encode_value(v: Value) -> dict:
    """Document form of a runtime Value. Undefined is never persisted."""
    if v.kind is ValueKind.BOOLEAN:
        return {"bool": v.payload}
    if v.kind is ValueKind.TEXT:
        return {"str": v.payload}
    if v.kind is ValueKind.TIMESTAMP:
        return {"ts": v.payload}
    if v.kind is ValueKind.NUMBER:
        f = v.payload
        return {"num": int(f) if f == int(f) and abs(f) < 1e16 else f}
    raise ValueError("Undefined has no document form")


def decode_value(doc) -> Value:
    if not isinstance(doc, dict) or len(doc) != 1:
        raise MalformedDocumentError(f"bad value document: {doc!r}")
    (tag, raw), = doc.items()
    if tag == "bool" and isinstance(raw, bool):
        return Value.boolean(raw)
    if tag == "str" and isinstance(raw, str):
        return Value.text(raw)
    if tag == "ts" and isinstance(raw, int) and not isinstance(raw, bool):
        return Value.timestamp(raw)
    if tag == "num" and isinstance(raw, (int, float)) and not isinstance(raw, bool):
        try:
            return Value.number(raw)
        except ValueError as e:
            raise MalformedDocumentError(str(e)) from None
    raise MalformedDocumentError(f"bad value document: {doc!r}")
