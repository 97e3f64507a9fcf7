"""Authored survey documents and submitted response records.

A survey definition is a tree of items (groups, questions, display blocks,
page breaks) whose texts, conditions, and validation rules all embed the
expression DSL. Definitions are immutable once loaded and fully validated:
every embedded expression passes the catalog check, item keys are unique
across the whole tree, and structural rules per item kind hold.

Document format: ``caselet-survey/1`` (JSON), described field by field in
the codec functions below. Dynamic text accepts a string shorthand with
``{{ expression }}`` placeholders; the canonical encoding always uses
explicit segment lists.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Iterator, Mapping

from .canonical import sorted_map
from .expressions import (
    Call,
    Expr,
    ExpressionError,
    EvalContext,
    Lit,
    Value,
    ValueKind,
    decode as decode_expr,
    decode_value,
    encode as encode_expr,
    encode_value,
    evaluate,
    lit,
    parse_text,
    render_number,
    validate as validate_expr,
    walk,
)

FORMAT_SURVEY = "caselet-survey/1"

ITEM_KINDS = ("group", "question", "display", "pageBreak")
SLOT_KINDS = ("singleChoice", "multipleChoice", "textInput", "numberInput", "dateInput")
CHOICE_KINDS = ("singleChoice", "multipleChoice")
SEGMENT_FORMATS = ("plain", "relativeDate", "integer")
SEVERITIES = ("hard", "soft")
DEFAULT_LOCALE = "en"


class SurveyError(Exception):
    pass


class SurveyDocumentError(SurveyError):
    """Document does not match the caselet-survey/1 schema."""


class DuplicateItemKeyError(SurveyError):
    def __init__(self, key: str):
        self.key = key
        super().__init__(f"duplicate itemKey '{key}'")


class InvalidExpressionError(SurveyError):
    def __init__(self, path: str, detail: str):
        self.path = path
        super().__init__(f"invalid expression at {path}: {detail}")


class StructureViolationError(SurveyError):
    def __init__(self, path: str, detail: str):
        self.path = path
        super().__init__(f"structure violation at {path}: {detail}")


# -- dynamic text ---------------------------------------------------------------


@dataclass(frozen=True)
class LitSegment:
    text: str


@dataclass(frozen=True)
class ExprSegment:
    expr: Expr
    format: str = "plain"  # plain | relativeDate | integer


Segment = LitSegment | ExprSegment


@dataclass(frozen=True)
class DynamicText:
    """Locale-keyed list of literal and placeholder segments."""

    by_locale: Mapping[str, tuple[Segment, ...]]

    def locales(self) -> list[str]:
        return sorted(self.by_locale)

    @staticmethod
    def plain(text: str, locale: str = DEFAULT_LOCALE) -> "DynamicText":
        return DynamicText({locale: (LitSegment(text),)})


def pick_locale(available, requested: str | None) -> str:
    """Requested locale if present, else the default, else the first sorted."""
    pool = sorted(available)
    if not pool:
        raise ValueError("dynamic text without locales")
    if requested and requested in pool:
        return requested
    if DEFAULT_LOCALE in pool:
        return DEFAULT_LOCALE
    return pool[0]


def value_to_plain(v: Value) -> str:
    if v.kind is ValueKind.BOOLEAN:
        return "true" if v.payload else "false"
    if v.kind is ValueKind.NUMBER:
        return render_number(v.payload)
    if v.kind is ValueKind.TEXT:
        return v.payload
    if v.kind is ValueKind.TIMESTAMP:
        dt = datetime.fromtimestamp(v.payload, tz=timezone.utc)
        return dt.strftime("%Y-%m-%dT%H:%M:%SZ")
    return ""


def _render_segment(seg: Segment, ctx: EvalContext, warnings: list[str]) -> str:
    if isinstance(seg, LitSegment):
        return seg.text
    value, ws = evaluate(seg.expr, ctx)
    warnings.extend(ws)
    if value.is_undefined:
        warnings.append("placeholder rendered empty: unresolved value")
        return ""
    if seg.format == "relativeDate":
        ts = value.payload if value.kind is ValueKind.TIMESTAMP else None
        if ts is None and value.kind is ValueKind.NUMBER:
            ts = int(value.payload)
        if ts is None:
            warnings.append("relativeDate placeholder needs a timestamp")
            return ""
        days = int((ts - ctx.now) / 86400)  # whole days, toward zero
        return f"{days:+d}d"
    if seg.format == "integer":
        if value.kind in (ValueKind.NUMBER, ValueKind.TIMESTAMP):
            return str(int(value.payload))
        warnings.append("integer placeholder needs a number")
        return ""
    return value_to_plain(value)


def render_dynamic_text(
    dt: DynamicText, ctx: EvalContext, locale: str | None = None
) -> tuple[str, list[str]]:
    """Resolve all placeholders for one locale; Undefined renders empty."""
    warnings: list[str] = []
    chosen = pick_locale(dt.by_locale, locale)
    parts = [_render_segment(s, ctx, warnings) for s in dt.by_locale[chosen]]
    return "".join(parts), warnings


def parse_placeholder_string(raw: str) -> tuple[Segment, ...]:
    """Parse the ``text {{ expr }} text`` shorthand into segments."""
    segments: list[Segment] = []
    rest = raw
    while True:
        start = rest.find("{{")
        if start < 0:
            if rest:
                segments.append(LitSegment(rest))
            break
        if start > 0:
            segments.append(LitSegment(rest[:start]))
        end = rest.find("}}", start + 2)
        if end < 0:
            raise SurveyDocumentError(f"unclosed placeholder in {raw!r}")
        inner = rest[start + 2 : end].strip()
        try:
            segments.append(ExprSegment(parse_text(inner)))
        except ExpressionError as e:
            raise SurveyDocumentError(f"bad placeholder {inner!r}: {e}") from None
        rest = rest[end + 2 :]
    return tuple(segments)


# -- definition model --------------------------------------------------------------


@dataclass(frozen=True)
class ChoiceOption:
    key: str
    label: DynamicText
    condition: Expr | None = None


@dataclass(frozen=True)
class ResponseSlotSpec:
    slot_key: str
    kind: str
    options: tuple[ChoiceOption, ...] = ()
    max_len: int | None = None
    min_value: float | None = None
    max_value: float | None = None
    min_date: int | None = None
    max_date: int | None = None


@dataclass(frozen=True)
class Component:
    role: str  # title | subtitle | responseGroup
    text: DynamicText | None = None
    response: ResponseSlotSpec | None = None


@dataclass(frozen=True)
class Validation:
    key: str
    severity: str
    rule: Expr
    message: DynamicText


@dataclass(frozen=True)
class SurveyItem:
    item_key: str
    kind: str
    condition: Expr | None = None
    components: tuple[Component, ...] = ()
    children: tuple["SurveyItem", ...] = ()
    validations: tuple[Validation, ...] = ()
    randomize_children: bool = False

    def response_slot(self) -> ResponseSlotSpec | None:
        for c in self.components:
            if c.role == "responseGroup":
                return c.response
        return None


@dataclass(frozen=True)
class SurveyDefinition:
    survey_key: str
    version_id: str
    items: tuple[SurveyItem, ...]
    metadata: Mapping[str, str] = field(default_factory=dict)

    def walk_items(self) -> Iterator[SurveyItem]:
        def rec(items):
            for it in items:
                yield it
                yield from rec(it.children)

        return rec(self.items)

    def question_keys(self) -> set[str]:
        return {it.item_key for it in self.walk_items() if it.kind == "question"}

    def find_item(self, item_key: str) -> SurveyItem | None:
        for it in self.walk_items():
            if it.item_key == item_key:
                return it
        return None


# -- response record ---------------------------------------------------------------


@dataclass(frozen=True)
class ResponseSlot:
    slot_key: str
    value: "Value | tuple[str, ...]"  # tuple = selected option keys


@dataclass(frozen=True)
class ResponseItem:
    item_key: str
    slots: tuple[ResponseSlot, ...]


@dataclass(frozen=True)
class SurveyResponse:
    survey_key: str
    version_id: str
    participant_ref: str
    opened_at: int
    submitted_at: int
    items: tuple[ResponseItem, ...]

    def __post_init__(self):
        if self.submitted_at < self.opened_at:
            raise ValueError("submittedAt must be >= openedAt")

    # ResponseReader protocol
    def slot_value(self, item_key: str, slot_key: str):
        for item in self.items:
            if item.item_key == item_key:
                for slot in item.slots:
                    if slot.slot_key == slot_key:
                        return slot.value
        return None

    def selected_count(self, item_key: str) -> int:
        for item in self.items:
            if item.item_key == item_key:
                return sum(
                    len(s.value) for s in item.slots if isinstance(s.value, tuple)
                )
        return 0


# -- document codec ------------------------------------------------------------------


def _require(doc: dict, key: str, path: str):
    if key not in doc:
        raise SurveyDocumentError(f"missing '{key}' at {path or 'root'}")
    return doc[key]


def _text_field(doc: dict, key: str, path: str) -> str:
    v = _require(doc, key, path)
    if not isinstance(v, str) or not v:
        raise SurveyDocumentError(f"'{key}' must be non-empty text at {path or 'root'}")
    return v


def _decode_expr_at(doc, path: str) -> Expr:
    try:
        expr = decode_expr(doc)
    except ExpressionError as e:
        raise InvalidExpressionError(path, str(e)) from None
    issues = validate_expr(expr)
    if issues:
        raise InvalidExpressionError(path, "; ".join(str(i) for i in issues))
    return expr


def decode_dynamic_text(doc, path: str) -> DynamicText:
    if isinstance(doc, str):
        doc = {DEFAULT_LOCALE: doc}
    if not isinstance(doc, dict) or not doc:
        raise SurveyDocumentError(f"dynamic text needs at least one locale at {path}")
    by_locale: dict[str, tuple[Segment, ...]] = {}
    for locale in sorted(doc):
        body = doc[locale]
        if isinstance(body, str):
            try:
                by_locale[locale] = parse_placeholder_string(body)
            except SurveyDocumentError as e:
                raise SurveyDocumentError(f"{e} at {path}.{locale}") from None
            continue
        if not isinstance(body, list):
            raise SurveyDocumentError(f"locale body must be text or segments at {path}.{locale}")
        segments: list[Segment] = []
        for i, seg in enumerate(body):
            seg_path = f"{path}.{locale}[{i}]"
            if not isinstance(seg, dict):
                raise SurveyDocumentError(f"bad segment at {seg_path}")
            if "lit" in seg:
                if not isinstance(seg["lit"], str):
                    raise SurveyDocumentError(f"'lit' must be text at {seg_path}")
                segments.append(LitSegment(seg["lit"]))
            elif "expr" in seg:
                fmt = seg.get("format", "plain")
                if fmt not in SEGMENT_FORMATS:
                    raise SurveyDocumentError(f"unknown format '{fmt}' at {seg_path}")
                segments.append(ExprSegment(_decode_expr_at(seg["expr"], seg_path), fmt))
            else:
                raise SurveyDocumentError(f"segment needs 'lit' or 'expr' at {seg_path}")
        by_locale[locale] = tuple(segments)
    return DynamicText(by_locale)


def encode_dynamic_text(dt: DynamicText) -> dict:
    out: dict = {}
    for locale in sorted(dt.by_locale):
        segs = []
        for seg in dt.by_locale[locale]:
            if isinstance(seg, LitSegment):
                segs.append({"lit": seg.text})
            else:
                segs.append({"expr": encode_expr(seg.expr), "format": seg.format})
        out[locale] = segs
    return out


def _decode_slot(doc, path: str) -> ResponseSlotSpec:
    if not isinstance(doc, dict):
        raise SurveyDocumentError(f"response spec must be an object at {path}")
    slot_key = _text_field(doc, "slotKey", path)
    kind = _text_field(doc, "kind", path)
    if kind not in SLOT_KINDS:
        raise StructureViolationError(path, f"unknown slot kind '{kind}'")

    options: tuple[ChoiceOption, ...] = ()
    if kind in CHOICE_KINDS:
        raw = _require(doc, "options", path)
        if not isinstance(raw, list) or not raw:
            raise StructureViolationError(path, "choice slots need a non-empty options list")
        seen: set[str] = set()
        opts = []
        for i, o in enumerate(raw):
            opath = f"{path}.options[{i}]"
            if not isinstance(o, dict):
                raise SurveyDocumentError(f"bad option at {opath}")
            key = _text_field(o, "key", opath)
            if key in seen:
                raise StructureViolationError(opath, f"duplicate option key '{key}'")
            seen.add(key)
            label = decode_dynamic_text(_require(o, "label", opath), f"{opath}.label")
            cond = None
            if "condition" in o:
                cond = _decode_expr_at(o["condition"], f"{opath}.condition")
            opts.append(ChoiceOption(key, label, cond))
        options = tuple(opts)

    def _num(key):
        v = doc.get(key)
        if v is None:
            return None
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise SurveyDocumentError(f"'{key}' must be a number at {path}")
        return v

    max_len = None
    if kind == "textInput":
        raw_len = doc.get("maxLen")
        if raw_len is not None:
            if isinstance(raw_len, bool) or not isinstance(raw_len, int) or raw_len <= 0:
                raise SurveyDocumentError(f"'maxLen' must be a positive integer at {path}")
            max_len = raw_len

    min_value = max_value = None
    if kind == "numberInput":
        min_value, max_value = _num("min"), _num("max")
        if min_value is not None and max_value is not None and min_value > max_value:
            raise StructureViolationError(path, "min must be <= max")

    min_date = max_date = None
    if kind == "dateInput":
        lo, hi = _num("min"), _num("max")
        min_date = int(lo) if lo is not None else None
        max_date = int(hi) if hi is not None else None
        if min_date is not None and max_date is not None and min_date > max_date:
            raise StructureViolationError(path, "min must be <= max")

    return ResponseSlotSpec(
        slot_key, kind, options, max_len, min_value, max_value, min_date, max_date
    )


def _encode_slot(slot: ResponseSlotSpec) -> dict:
    out: dict = {"slotKey": slot.slot_key, "kind": slot.kind}
    if slot.kind in CHOICE_KINDS:
        opts = []
        for o in slot.options:
            od: dict = {"key": o.key, "label": encode_dynamic_text(o.label)}
            if o.condition is not None:
                od["condition"] = encode_expr(o.condition)
            opts.append(od)
        out["options"] = opts
    if slot.kind == "textInput" and slot.max_len is not None:
        out["maxLen"] = slot.max_len
    if slot.kind == "numberInput":
        if slot.min_value is not None:
            out["min"] = slot.min_value
        if slot.max_value is not None:
            out["max"] = slot.max_value
    if slot.kind == "dateInput":
        if slot.min_date is not None:
            out["min"] = slot.min_date
        if slot.max_date is not None:
            out["max"] = slot.max_date
    return out


def _decode_item(doc, path: str) -> SurveyItem:
    if not isinstance(doc, dict):
        raise SurveyDocumentError(f"item must be an object at {path}")
    item_key = _text_field(doc, "itemKey", path)
    kind = _text_field(doc, "kind", path)
    if kind not in ITEM_KINDS:
        raise StructureViolationError(path, f"unknown item kind '{kind}'")

    condition = None
    if "condition" in doc:
        condition = _decode_expr_at(doc["condition"], f"{path}.condition")

    components: tuple[Component, ...] = ()
    if "components" in doc:
        if kind not in ("question", "display"):
            raise StructureViolationError(path, f"{kind} items cannot have components")
        raw = doc["components"]
        if not isinstance(raw, list):
            raise SurveyDocumentError(f"'components' must be a list at {path}")
        comps = []
        for i, c in enumerate(raw):
            cpath = f"{path}.components[{i}]"
            if not isinstance(c, dict):
                raise SurveyDocumentError(f"bad component at {cpath}")
            role = _text_field(c, "role", cpath)
            if role in ("title", "subtitle"):
                comps.append(
                    Component(role, text=decode_dynamic_text(_require(c, "text", cpath), f"{cpath}.text"))
                )
            elif role == "responseGroup":
                comps.append(
                    Component(role, response=_decode_slot(_require(c, "response", cpath), f"{cpath}.response"))
                )
            else:
                raise StructureViolationError(cpath, f"unknown component role '{role}'")
        components = tuple(comps)

    children: tuple[SurveyItem, ...] = ()
    if "children" in doc:
        if kind != "group":
            raise StructureViolationError(path, f"{kind} items cannot have children")
        raw = doc["children"]
        if not isinstance(raw, list):
            raise SurveyDocumentError(f"'children' must be a list at {path}")
        children = tuple(
            _decode_item(c, f"{path}.children[{i}]") for i, c in enumerate(raw)
        )

    validations: tuple[Validation, ...] = ()
    if "validations" in doc:
        if kind not in ("question", "display"):
            raise StructureViolationError(path, f"{kind} items cannot carry validations")
        raw = doc["validations"]
        if not isinstance(raw, list):
            raise SurveyDocumentError(f"'validations' must be a list at {path}")
        seen: set[str] = set()
        vals = []
        for i, v in enumerate(raw):
            vpath = f"{path}.validations[{i}]"
            if not isinstance(v, dict):
                raise SurveyDocumentError(f"bad validation at {vpath}")
            key = _text_field(v, "key", vpath)
            if key in seen:
                raise StructureViolationError(vpath, f"duplicate validation key '{key}'")
            seen.add(key)
            severity = _text_field(v, "severity", vpath)
            if severity not in SEVERITIES:
                raise StructureViolationError(vpath, f"severity must be hard|soft")
            rule = _decode_expr_at(_require(v, "rule", vpath), f"{vpath}.rule")
            message = decode_dynamic_text(_require(v, "message", vpath), f"{vpath}.message")
            vals.append(Validation(key, severity, rule, message))
        validations = tuple(vals)

    randomize = bool(doc.get("randomizeChildren", False))
    if randomize and kind != "group":
        raise StructureViolationError(path, "randomizeChildren applies to groups only")

    item = SurveyItem(item_key, kind, condition, components, children, validations, randomize)
    _check_item_structure(item, path)
    return item


def _check_item_structure(item: SurveyItem, path: str) -> None:
    if item.kind == "pageBreak":
        if item.components or item.children or item.validations:
            raise StructureViolationError(path, "pageBreak items must be bare")
    if item.kind == "question":
        slots = [c for c in item.components if c.role == "responseGroup"]
        if len(slots) != 1:
            raise StructureViolationError(
                path, "question items need exactly one responseGroup component"
            )
    if item.kind == "display":
        if any(c.role == "responseGroup" for c in item.components):
            raise StructureViolationError(path, "display items cannot collect responses")


def load_survey(doc) -> SurveyDefinition:
    """Decode and fully validate a caselet-survey/1 document."""
    if not isinstance(doc, dict):
        raise SurveyDocumentError("survey document must be an object")
    if doc.get("format") != FORMAT_SURVEY:
        raise SurveyDocumentError(f"format must be '{FORMAT_SURVEY}'")
    survey_key = _text_field(doc, "surveyKey", "")
    version_id = _text_field(doc, "versionId", "")
    raw_items = _require(doc, "items", "")
    if not isinstance(raw_items, list):
        raise SurveyDocumentError("'items' must be a list")
    items = tuple(_decode_item(it, f"items[{i}]") for i, it in enumerate(raw_items))

    metadata = doc.get("metadata", {})
    if not isinstance(metadata, dict) or not all(
        isinstance(k, str) and isinstance(v, str) for k, v in metadata.items()
    ):
        raise SurveyDocumentError("'metadata' must map text to text")

    definition = SurveyDefinition(survey_key, version_id, items, sorted_map(metadata))
    seen: set[str] = set()
    for it in definition.walk_items():
        if it.item_key in seen:
            raise DuplicateItemKeyError(it.item_key)
        seen.add(it.item_key)
    return definition


def _encode_item(item: SurveyItem) -> dict:
    out: dict = {"itemKey": item.item_key, "kind": item.kind}
    if item.condition is not None:
        out["condition"] = encode_expr(item.condition)
    if item.components:
        comps = []
        for c in item.components:
            if c.role == "responseGroup":
                comps.append({"role": c.role, "response": _encode_slot(c.response)})
            else:
                comps.append({"role": c.role, "text": encode_dynamic_text(c.text)})
        out["components"] = comps
    if item.children:
        out["children"] = [_encode_item(c) for c in item.children]
    if item.validations:
        out["validations"] = [
            {
                "key": v.key,
                "severity": v.severity,
                "rule": encode_expr(v.rule),
                "message": encode_dynamic_text(v.message),
            }
            for v in item.validations
        ]
    if item.randomize_children:
        out["randomizeChildren"] = True
    return out


def encode_survey(definition: SurveyDefinition) -> dict:
    out: dict = {
        "format": FORMAT_SURVEY,
        "surveyKey": definition.survey_key,
        "versionId": definition.version_id,
        "items": [_encode_item(it) for it in definition.items],
    }
    if definition.metadata:
        out["metadata"] = sorted_map(dict(definition.metadata))
    return out


# -- response codec -------------------------------------------------------------------


def encode_response(r: SurveyResponse) -> dict:
    items = []
    for item in r.items:
        slots = []
        for slot in item.slots:
            if isinstance(slot.value, tuple):
                value_doc: dict = {"keys": list(slot.value)}
            else:
                value_doc = encode_value(slot.value)
            slots.append({"slotKey": slot.slot_key, "value": value_doc})
        items.append({"itemKey": item.item_key, "slots": slots})
    return {
        "surveyKey": r.survey_key,
        "versionId": r.version_id,
        "participantRef": r.participant_ref,
        "openedAt": r.opened_at,
        "submittedAt": r.submitted_at,
        "items": items,
    }


def decode_response(doc) -> SurveyResponse:
    try:
        items = []
        for item in doc["items"]:
            slots = []
            for slot in item["slots"]:
                raw = slot["value"]
                if "keys" in raw:
                    value: "Value | tuple[str, ...]" = tuple(raw["keys"])
                else:
                    value = decode_value(raw)
                slots.append(ResponseSlot(slot["slotKey"], value))
            items.append(ResponseItem(item["itemKey"], tuple(slots)))
        return SurveyResponse(
            survey_key=doc["surveyKey"],
            version_id=doc["versionId"],
            participant_ref=doc["participantRef"],
            opened_at=int(doc["openedAt"]),
            submitted_at=int(doc["submittedAt"]),
            items=tuple(items),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise SurveyDocumentError(f"bad response document: {e}") from None


# -- lint --------------------------------------------------------------------------


@dataclass(frozen=True)
class LintIssue:
    kind: str  # DanglingReference | UnreachableItem | EmptyGroup | NoQuestions
    path: str
    detail: str

    def __str__(self) -> str:
        return f"{self.kind} at {self.path or 'survey'}: {self.detail}"


_ITEM_REF_FUNCS = {"getResponseValue": 0, "hasResponse": 0, "countSelected": 0}


def _referenced_item_keys(expr: Expr):
    for _, node in walk(expr):
        if isinstance(node, Call) and node.name in _ITEM_REF_FUNCS:
            arg_idx = _ITEM_REF_FUNCS[node.name]
            if len(node.args) > arg_idx and isinstance(node.args[arg_idx], Lit):
                v = node.args[arg_idx].value
                if v.kind is ValueKind.TEXT:
                    yield v.payload


def _expressions_of(item: SurveyItem):
    if item.condition is not None:
        yield "condition", item.condition
    for i, c in enumerate(item.components):
        if c.text is not None:
            for locale, segs in c.text.by_locale.items():
                for seg in segs:
                    if isinstance(seg, ExprSegment):
                        yield f"components[{i}].text.{locale}", seg.expr
        if c.response is not None:
            for j, o in enumerate(c.response.options):
                if o.condition is not None:
                    yield f"components[{i}].options[{j}].condition", o.condition
                for locale, segs in o.label.by_locale.items():
                    for seg in segs:
                        if isinstance(seg, ExprSegment):
                            yield f"components[{i}].options[{j}].label.{locale}", seg.expr
    for i, v in enumerate(item.validations):
        yield f"validations[{i}].rule", v.rule
        for locale, segs in v.message.by_locale.items():
            for seg in segs:
                if isinstance(seg, ExprSegment):
                    yield f"validations[{i}].message.{locale}", seg.expr


def lint_survey(definition: SurveyDefinition) -> list[LintIssue]:
    """Non-fatal authoring checks on a valid definition."""
    issues: list[LintIssue] = []
    question_keys = definition.question_keys()

    any_question = False
    for item in definition.walk_items():
        if item.kind == "question":
            any_question = True
        if item.kind == "group" and not item.children:
            issues.append(LintIssue("EmptyGroup", item.item_key, "group has no children"))
        if item.condition == lit(False):
            issues.append(
                LintIssue("UnreachableItem", item.item_key, "condition is literally false")
            )
        for where, expr in _expressions_of(item):
            for ref in _referenced_item_keys(expr):
                if ref not in question_keys:
                    issues.append(
                        LintIssue(
                            "DanglingReference",
                            f"{item.item_key}.{where}",
                            f"references unknown item '{ref}'",
                        )
                    )
    if not any_question:
        issues.append(LintIssue("NoQuestions", "", "survey has no question items"))
    return issues
