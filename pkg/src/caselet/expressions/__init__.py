"""Expression DSL: the single logic formalism for conditions, dynamic
content, and study rule actions."""

from .ast import (
    FALSE,
    LITERAL_KINDS,
    MAX_DEPTH,
    TRUE,
    UNDEFINED,
    Call,
    Expr,
    Lit,
    Value,
    ValueKind,
    call,
    depth_of,
    lit,
    walk,
)
from .catalog import CATALOG, FunctionSpec, Issue, is_context_free, is_valid, validate
from .codec import decode, decode_value, encode, encode_value
from .context import EMPTY_CONTEXT, EvalContext, ResponseReader, StateReader
from .errors import (
    ArityMismatchError,
    DepthExceededError,
    ExpressionError,
    ExpressionSyntaxError,
    MalformedDocumentError,
    UnknownFunctionError,
)
from .evaluator import describe, evaluate, truthy
from .parser import parse_text
from .printer import print_text, quote_text, render_number

__all__ = [
    "ArityMismatchError",
    "CATALOG",
    "Call",
    "DepthExceededError",
    "EMPTY_CONTEXT",
    "EvalContext",
    "Expr",
    "ExpressionError",
    "ExpressionSyntaxError",
    "FALSE",
    "FunctionSpec",
    "Issue",
    "LITERAL_KINDS",
    "Lit",
    "MAX_DEPTH",
    "MalformedDocumentError",
    "ResponseReader",
    "StateReader",
    "TRUE",
    "UNDEFINED",
    "UnknownFunctionError",
    "Value",
    "ValueKind",
    "call",
    "decode",
    "decode_value",
    "depth_of",
    "describe",
    "encode",
    "encode_value",
    "evaluate",
    "is_context_free",
    "is_valid",
    "lit",
    "parse_text",
    "print_text",
    "quote_text",
    "render_number",
    "truthy",
    "validate",
    "walk",
]
