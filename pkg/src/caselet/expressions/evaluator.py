"""Total evaluator for validated expressions.

Design rules, in order of precedence:

* evaluate() never raises for a validated tree; every failure mode folds
  into Undefined, usually with a warning.
* A missing context reference yields Undefined plus exactly one warning
  naming the reference. Undefined then propagates silently: comparisons
  with an Undefined operand return false, arithmetic returns Undefined,
  and boolean positions coerce Undefined to false — none of these add a
  second warning for the same root cause.
* Numbers and timestamps interoperate numerically: timestamps coerce to
  numbers in arithmetic and compare numerically against numbers. Any
  other cross-kind comparison is false plus a warning.
* and/or evaluate left to right and short-circuit; warnings from branches
  that were never evaluated are not emitted.
"""

from __future__ import annotations

import math
from typing import Callable

from .ast import FALSE, TRUE, UNDEFINED, Call, Expr, Lit, Value, ValueKind
from .context import EvalContext
from .printer import print_text

_Handler = Callable[[tuple[Expr, ...], EvalContext, list[str]], Value]
_HANDLERS: dict[str, _Handler] = {}


def evaluate(expr: Expr, ctx: EvalContext) -> tuple[Value, list[str]]:
    """Evaluate a validated expression; returns (value, warnings)."""
    warnings: list[str] = []
    value = _eval(expr, ctx, warnings)
    return value, warnings


def _eval(expr: Expr, ctx: EvalContext, warn: list[str]) -> Value:
    if isinstance(expr, Lit):
        return expr.value
    handler = _HANDLERS.get(expr.name)
    if handler is None:  # unreachable for validated trees
        warn.append(f"unknown function '{expr.name}'")
        return UNDEFINED
    return handler(expr.args, ctx, warn)


def _register(name: str):
    def deco(fn: _Handler) -> _Handler:
        _HANDLERS[name] = fn
        return fn

    return deco


# -- coercions ---------------------------------------------------------------


def truthy(v: Value, warn: list[str] | None = None, where: str = "condition") -> bool:
    """Boolean-position coercion: true only for Boolean(true). Undefined is
    silently false; any other kind is false with a warning."""
    if v.kind is ValueKind.BOOLEAN:
        return bool(v.payload)
    if not v.is_undefined and warn is not None:
        warn.append(f"{where}: expected boolean, got {v.kind.name.lower()}")
    return False


def _numeric(v: Value) -> float | None:
    """Number/Timestamp payload as float; None for anything else."""
    if v.kind is ValueKind.NUMBER:
        return v.payload
    if v.kind is ValueKind.TIMESTAMP:
        return float(v.payload)
    return None


# -- logic -------------------------------------------------------------------


@_register("and")
def _and(args, ctx, warn):
    for a in args:
        if not truthy(_eval(a, ctx, warn), warn, "and"):
            return FALSE
    return TRUE


@_register("or")
def _or(args, ctx, warn):
    for a in args:
        if truthy(_eval(a, ctx, warn), warn, "or"):
            return TRUE
    return FALSE


@_register("not")
def _not(args, ctx, warn):
    return Value.boolean(not truthy(_eval(args[0], ctx, warn), warn, "not"))


# -- comparisons ---------------------------------------------------------------

_ORDER_OPS = {
    "lt": lambda a, b: a < b,
    "lte": lambda a, b: a <= b,
    "gt": lambda a, b: a > b,
    "gte": lambda a, b: a >= b,
}


def _compare(name: str, args, ctx, warn) -> Value:
    left = _eval(args[0], ctx, warn)
    right = _eval(args[1], ctx, warn)
    if left.is_undefined or right.is_undefined:
        return FALSE

    ln, rn = _numeric(left), _numeric(right)
    numeric_pair = ln is not None and rn is not None
    if left.kind is not right.kind and not numeric_pair:
        warn.append(
            f"{name}: cannot compare {left.kind.name.lower()} with {right.kind.name.lower()}"
        )
        return FALSE

    if name == "eq" or name == "ne":
        equal = (ln == rn) if numeric_pair else (left.payload == right.payload)
        return Value.boolean(equal if name == "eq" else not equal)

    op = _ORDER_OPS[name]
    if numeric_pair:
        return Value.boolean(op(ln, rn))
    if left.kind is ValueKind.TEXT:  # code-point order
        return Value.boolean(op(left.payload, right.payload))
    warn.append(f"{name}: {left.kind.name.lower()} values have no order")
    return FALSE


for _cmp in ("eq", "ne", "lt", "lte", "gt", "gte"):
    _HANDLERS[_cmp] = (lambda n: lambda args, ctx, warn: _compare(n, args, ctx, warn))(_cmp)


# -- arithmetic ----------------------------------------------------------------


def _numeric_args(name, args, ctx, warn) -> list[float] | None:
    out: list[float] = []
    for a in args:
        v = _eval(a, ctx, warn)
        if v.is_undefined:
            return None
        f = _numeric(v)
        if f is None:
            warn.append(f"{name}: expected number, got {v.kind.name.lower()}")
            return None
        out.append(f)
    return out


def _finite(name: str, result: float, warn: list[str]) -> Value:
    if not math.isfinite(result):
        warn.append(f"{name}: result is not finite")
        return UNDEFINED
    return Value.number(result)


@_register("sum")
def _sum(args, ctx, warn):
    # Left-to-right IEEE fold, so results are reproducible bit for bit.
    ops = _numeric_args("sum", args, ctx, warn)
    if ops is None:
        return UNDEFINED
    result = ops[0]
    for f in ops[1:]:
        result += f
    return _finite("sum", result, warn)


@_register("sub")
def _sub(args, ctx, warn):
    ops = _numeric_args("sub", args, ctx, warn)
    return UNDEFINED if ops is None else _finite("sub", ops[0] - ops[1], warn)


@_register("mul")
def _mul(args, ctx, warn):
    ops = _numeric_args("mul", args, ctx, warn)
    if ops is None:
        return UNDEFINED
    result = 1.0
    for f in ops:
        result *= f
    return _finite("mul", result, warn)


# -- time ----------------------------------------------------------------------


@_register("now")
def _now(args, ctx, warn):
    return Value.timestamp(ctx.now)


@_register("timestampWithOffset")
def _ts_offset(args, ctx, warn):
    delta = _eval(args[0], ctx, warn)
    df = _numeric(delta)
    if df is None:
        if not delta.is_undefined:
            warn.append(
                f"timestampWithOffset: expected number, got {delta.kind.name.lower()}"
            )
        return UNDEFINED
    if len(args) == 2:
        ref = _eval(args[1], ctx, warn)
        rf = _numeric(ref)
        if rf is None:
            if not ref.is_undefined:
                warn.append(
                    f"timestampWithOffset: expected timestamp, got {ref.kind.name.lower()}"
                )
            return UNDEFINED
    else:
        rf = float(ctx.now)
    result = rf + df
    if not math.isfinite(result):
        warn.append("timestampWithOffset: result is not finite")
        return UNDEFINED
    return Value.timestamp(math.trunc(result))


# -- context lookups -------------------------------------------------------------


def _text_arg(name, args, i, ctx, warn) -> str | None:
    v = _eval(args[i], ctx, warn)
    if v.kind is not ValueKind.TEXT:
        if not v.is_undefined:
            warn.append(f"{name}: argument {i + 1} must be text")
        return None
    return v.payload


def _missing(warn: list[str], name: str, what: str) -> Value:
    warn.append(f"{name}: {what}")
    return UNDEFINED


def _slot_to_value(raw) -> Value:
    # Multi-choice answers surface as the comma-joined selected keys.
    if isinstance(raw, (list, tuple)):
        return Value.text(",".join(raw))
    return raw


@_register("getResponseValue")
def _get_response_value(args, ctx, warn):
    item = _text_arg("getResponseValue", args, 0, ctx, warn)
    slot = _text_arg("getResponseValue", args, 1, ctx, warn)
    if item is None or slot is None:
        return UNDEFINED
    if ctx.current_response is None:
        return _missing(warn, "getResponseValue", "no current response")
    raw = ctx.current_response.slot_value(item, slot)
    if raw is None:
        return _missing(warn, "getResponseValue", f"no value for {item}.{slot}")
    return _slot_to_value(raw)


@_register("hasResponse")
def _has_response(args, ctx, warn):
    item = _text_arg("hasResponse", args, 0, ctx, warn)
    slot = _text_arg("hasResponse", args, 1, ctx, warn)
    if item is None or slot is None:
        return UNDEFINED
    if ctx.current_response is None:
        return _missing(warn, "hasResponse", "no current response")
    raw = ctx.current_response.slot_value(item, slot)
    if raw is None:
        return FALSE
    if isinstance(raw, (list, tuple)):
        return Value.boolean(len(raw) > 0)
    if raw.kind is ValueKind.TEXT:
        return Value.boolean(raw.payload != "")
    return Value.boolean(not raw.is_undefined)


@_register("countSelected")
def _count_selected(args, ctx, warn):
    item = _text_arg("countSelected", args, 0, ctx, warn)
    if item is None:
        return UNDEFINED
    if ctx.current_response is None:
        return _missing(warn, "countSelected", "no current response")
    return Value.number(ctx.current_response.selected_count(item))


@_register("getPrevResponseValue")
def _get_prev_response_value(args, ctx, warn):
    survey = _text_arg("getPrevResponseValue", args, 0, ctx, warn)
    item = _text_arg("getPrevResponseValue", args, 1, ctx, warn)
    slot = _text_arg("getPrevResponseValue", args, 2, ctx, warn)
    if survey is None or item is None or slot is None:
        return UNDEFINED
    prev = ctx.previous_responses.get(survey)
    if prev is None:
        return _missing(warn, "getPrevResponseValue", f"no previous response for {survey}")
    raw = prev.slot_value(item, slot)
    if raw is None:
        return _missing(
            warn, "getPrevResponseValue", f"no value for {survey}:{item}.{slot}"
        )
    return _slot_to_value(raw)


@_register("getLastSubmissionDate")
def _get_last_submission(args, ctx, warn):
    survey = _text_arg("getLastSubmissionDate", args, 0, ctx, warn)
    if survey is None:
        return UNDEFINED
    if ctx.participant_state is None:
        return _missing(warn, "getLastSubmissionDate", "no participant state")
    at = ctx.participant_state.last_submissions.get(survey)
    if at is None:
        return _missing(warn, "getLastSubmissionDate", f"no submission recorded for {survey}")
    return Value.timestamp(at)


@_register("getStudyFlag")
def _get_study_flag(args, ctx, warn):
    key = _text_arg("getStudyFlag", args, 0, ctx, warn)
    if key is None:
        return UNDEFINED
    if ctx.participant_state is None:
        return _missing(warn, "getStudyFlag", "no participant state")
    flag = ctx.participant_state.flags.get(key)
    if flag is None:
        return _missing(warn, "getStudyFlag", f"no flag {key}")
    return flag


@_register("hasStudyStatus")
def _has_study_status(args, ctx, warn):
    status = _text_arg("hasStudyStatus", args, 0, ctx, warn)
    if status is None:
        return UNDEFINED
    if ctx.participant_state is None:
        return _missing(warn, "hasStudyStatus", "no participant state")
    return Value.boolean(ctx.participant_state.study_status == status)


@_register("getEventPayload")
def _get_event_payload(args, ctx, warn):
    key = _text_arg("getEventPayload", args, 0, ctx, warn)
    if key is None:
        return UNDEFINED
    v = ctx.event_payload.get(key)
    if v is None:
        return _missing(warn, "getEventPayload", f"no payload key {key}")
    return v


@_register("getContext")
def _get_context(args, ctx, warn):
    key = _text_arg("getContext", args, 0, ctx, warn)
    if key is None:
        return UNDEFINED
    v = ctx.external_context.get(key)
    if v is None:
        return _missing(warn, "getContext", f"no context key {key}")
    return v


def describe(expr: Expr) -> str:
    """Short rendering used in warnings and audit entries."""
    text = print_text(expr)
    return text if len(text) <= 80 else text[:77] + "..."
