"""Adaptive survey sessions: visibility, validation, pagination, navigation.

A session is a single-writer state machine around one definition and one
evolving answer buffer. Every operation re-renders the whole survey in a
single pass over the presentation tree, in document order:

* the pass starts from the full answer buffer; when an item's condition
  evaluates false, the item is skipped and its (and its descendants')
  answers are masked for the rest of the pass — forward references still
  read current buffered values;
* buffered answers of hidden items are retained in the session and come
  back unchanged when the item re-appears, but never leak into the
  finalized response;
* visible page breaks partition the visible leaves into pages, so a
  hidden page break collapses two pages into one;
* navigation forward is gated by hard validations on the current page,
  submission by hard validations on every visible page.

Randomized groups are shuffled once, at session start, with a Fisher-Yates
driven by splitmix64 seeded from (session seed, group key): rendering is a
pure function of (definition, seed, answers, clock).
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .expressions import (
    EvalContext,
    Value,
    ValueKind,
    encode_value,
    evaluate,
    truthy,
)
from .surveys import (
    ResponseItem,
    ResponseSlot,
    ResponseSlotSpec,
    SurveyDefinition,
    SurveyItem,
    SurveyResponse,
    pick_locale,
    render_dynamic_text,
)

_MASK64 = (1 << 64) - 1


class EngineError(Exception):
    pass


class UnknownItemError(EngineError):
    pass


class SlotKindMismatchError(EngineError):
    pass


class AtBoundaryError(EngineError):
    pass


class NavigationBlockedError(EngineError):
    def __init__(self, failures: list[tuple[str, str]]):
        self.failures = failures  # (itemKey, validationKey)
        names = ", ".join(f"{i}:{k}" for i, k in failures)
        super().__init__(f"blocked by hard validations: {names}")


class SubmitBlockedError(EngineError):
    def __init__(self, failures: list[tuple[str, str]]):
        self.failures = failures
        names = ", ".join(f"{i}:{k}" for i, k in failures)
        super().__init__(f"submit blocked by hard validations: {names}")


# -- deterministic shuffling -------------------------------------------------------


class SplitMix64:
    def __init__(self, seed: int):
        self._state = seed & _MASK64

    def next(self) -> int:
        self._state = (self._state + 0x9E3779B97F4A7C15) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)


def _fnv1a64(text: str) -> int:
    h = 0xCBF29CE484222325
    for b in text.encode("utf-8"):
        h = ((h ^ b) * 0x100000001B3) & _MASK64
    return h


def shuffled(seq, seed: int) -> list:
    out = list(seq)
    rng = SplitMix64(seed)
    for i in range(len(out) - 1, 0, -1):
        j = rng.next() % (i + 1)
        out[i], out[j] = out[j], out[i]
    return out


def _presentation_items(items, seed: int) -> tuple[SurveyItem, ...]:
    """Apply per-group deterministic shuffles to direct children."""
    rendered = []
    for item in items:
        children = item.children
        if children:
            if item.randomize_children:
                children = tuple(shuffled(children, seed ^ _fnv1a64(item.item_key)))
            children = _presentation_items(children, seed)
            item = SurveyItem(
                item.item_key,
                item.kind,
                item.condition,
                item.components,
                children,
                item.validations,
                item.randomize_children,
            )
        rendered.append(item)
    return tuple(rendered)


# -- rendered view -----------------------------------------------------------------


@dataclass(frozen=True)
class ValidationResult:
    key: str
    severity: str
    passed: bool
    messages: dict[str, str]  # locale -> resolved text


@dataclass(frozen=True)
class RenderedOption:
    key: str
    labels: dict[str, str]
    visible: bool


@dataclass(frozen=True)
class RenderedSlot:
    slot_key: str
    kind: str
    options: tuple[RenderedOption, ...] = ()
    max_len: int | None = None
    min_value: float | None = None
    max_value: float | None = None
    min_date: int | None = None
    max_date: int | None = None


@dataclass(frozen=True)
class RenderedItem:
    item_key: str
    kind: str  # question | display
    components: tuple[tuple[str, dict[str, str]], ...]  # (role, locale->text)
    slot: RenderedSlot | None
    answer: "Value | tuple[str, ...] | None"
    validations: tuple[ValidationResult, ...]

    def failing_hard(self) -> list[str]:
        return [v.key for v in self.validations if v.severity == "hard" and not v.passed]


@dataclass(frozen=True)
class RenderedSnapshot:
    page_index: int
    page_count: int
    items: tuple[RenderedItem, ...]
    can_go_prev: bool
    can_go_next: bool
    can_submit: bool
    warnings: tuple[str, ...]


@dataclass
class _View:
    pages: list[list[RenderedItem]]
    warnings: list[str]
    visible_questions: list[str]  # presentation order, across all pages

    def failures_on(self, page_index: int) -> list[tuple[str, str]]:
        out = []
        for item in self.pages[page_index]:
            for key in item.failing_hard():
                out.append((item.item_key, key))
        return out

    def all_failures(self) -> list[tuple[str, str]]:
        out = []
        for i in range(len(self.pages)):
            out.extend(self.failures_on(i))
        return out


class _WorkingResponse:
    """ResponseReader over the in-pass answer map (hidden items masked)."""

    def __init__(self, answers: dict[str, dict[str, object]]):
        self.answers = answers

    def slot_value(self, item_key, slot_key):
        return self.answers.get(item_key, {}).get(slot_key)

    def selected_count(self, item_key):
        total = 0
        for raw in self.answers.get(item_key, {}).values():
            if isinstance(raw, (list, tuple)):
                total += len(raw)
        return total


# -- session ------------------------------------------------------------------------


@dataclass
class SurveySession:
    definition: SurveyDefinition
    presentation: tuple[SurveyItem, ...]
    base_ctx: EvalContext
    seed: int
    opened_at: int
    participant_ref: str = ""
    page_index: int = 0
    buffer: dict[str, dict[str, object]] = field(default_factory=dict)

    def question_item(self, item_key: str) -> SurveyItem:
        item = self.definition.find_item(item_key)
        if item is None or item.kind != "question":
            raise UnknownItemError(f"no question item '{item_key}'")
        return item


def start_session(
    definition: SurveyDefinition,
    ctx: EvalContext,
    seed: int,
    clock: int,
    participant_ref: str = "",
) -> tuple[SurveySession, RenderedSnapshot]:
    if ctx.now != clock:
        raise ValueError("ctx.now must equal the session clock")
    session = SurveySession(
        definition=definition,
        presentation=_presentation_items(definition.items, seed),
        base_ctx=ctx,
        seed=seed,
        opened_at=clock,
        participant_ref=participant_ref,
    )
    return session, snapshot(session)


def _session_ctx(session: SurveySession, working: _WorkingResponse) -> EvalContext:
    base = session.base_ctx
    return EvalContext(
        now=base.now,
        current_response=working,
        previous_responses=base.previous_responses,
        participant_state=base.participant_state,
        event_payload=base.event_payload,
        external_context=base.external_context,
    )


def _question_keys_under(item: SurveyItem):
    if item.kind == "question":
        yield item.item_key
    for child in item.children:
        yield from _question_keys_under(child)


def _builtin_validations(
    item: SurveyItem, answer, locales
) -> list[ValidationResult]:
    slot = item.response_slot()
    if slot is None or answer is None:
        return []
    results = []

    def message(text: str) -> dict[str, str]:
        return {loc: text for loc in locales}

    if slot.kind == "textInput" and slot.max_len is not None:
        if isinstance(answer, Value) and answer.kind is ValueKind.TEXT:
            ok = len(answer.payload) <= slot.max_len
            results.append(
                ValidationResult(
                    "lengthCheck", "hard", ok, message(f"At most {slot.max_len} characters")
                )
            )
    if slot.kind == "numberInput" and isinstance(answer, Value) and answer.kind is ValueKind.NUMBER:
        ok = True
        if slot.min_value is not None and answer.payload < slot.min_value:
            ok = False
        if slot.max_value is not None and answer.payload > slot.max_value:
            ok = False
        if slot.min_value is not None or slot.max_value is not None:
            results.append(
                ValidationResult("rangeCheck", "hard", ok, message("Value out of range"))
            )
    if slot.kind == "dateInput" and isinstance(answer, Value) and answer.kind is ValueKind.TIMESTAMP:
        ok = True
        if slot.min_date is not None and answer.payload < slot.min_date:
            ok = False
        if slot.max_date is not None and answer.payload > slot.max_date:
            ok = False
        if slot.min_date is not None or slot.max_date is not None:
            results.append(
                ValidationResult("rangeCheck", "hard", ok, message("Date out of range"))
            )
    return results


def _render_leaf(
    item: SurveyItem, ctx: EvalContext, answer, warnings: list[str]
) -> RenderedItem:
    components = []
    locales: set[str] = set()
    for c in item.components:
        if c.text is not None:
            locales.update(c.text.by_locale)
    if not locales:
        locales = {"en"}

    for c in item.components:
        if c.role in ("title", "subtitle") and c.text is not None:
            texts = {}
            for locale in sorted(c.text.by_locale):
                rendered, ws = render_dynamic_text(c.text, ctx, locale)
                warnings.extend(ws)
                texts[locale] = rendered
            components.append((c.role, texts))

    slot_spec = item.response_slot()
    rendered_slot = None
    if slot_spec is not None:
        options = []
        for o in slot_spec.options:
            visible = True
            if o.condition is not None:
                value, ws = evaluate(o.condition, ctx)
                warnings.extend(ws)
                visible = truthy(value, warnings, f"option {o.key}")
            labels = {}
            for locale in sorted(o.label.by_locale):
                rendered, ws = render_dynamic_text(o.label, ctx, locale)
                warnings.extend(ws)
                labels[locale] = rendered
            options.append(RenderedOption(o.key, labels, visible))
        rendered_slot = RenderedSlot(
            slot_spec.slot_key,
            slot_spec.kind,
            tuple(options),
            slot_spec.max_len,
            slot_spec.min_value,
            slot_spec.max_value,
            slot_spec.min_date,
            slot_spec.max_date,
        )

    validations = list(_builtin_validations(item, answer, sorted(locales)))
    for v in item.validations:
        value, ws = evaluate(v.rule, ctx)
        warnings.extend(ws)
        passed = truthy(value, warnings, f"validation {v.key}")
        messages = {}
        for locale in sorted(v.message.by_locale):
            rendered, ws = render_dynamic_text(v.message, ctx, locale)
            warnings.extend(ws)
            messages[locale] = rendered
        validations.append(ValidationResult(v.key, v.severity, passed, messages))

    return RenderedItem(
        item.item_key,
        item.kind,
        tuple(components),
        rendered_slot,
        answer,
        tuple(validations),
    )


def _compute_view(session: SurveySession) -> _View:
    working_answers = {k: dict(v) for k, v in session.buffer.items()}
    working = _WorkingResponse(working_answers)
    ctx = _session_ctx(session, working)
    warnings: list[str] = []
    pages: list[list[RenderedItem]] = [[]]
    visible_questions: list[str] = []

    def mask_subtree(item: SurveyItem):
        for key in _question_keys_under(item):
            working_answers.pop(key, None)

    def walk(items):
        for item in items:
            if item.condition is not None:
                value, ws = evaluate(item.condition, ctx)
                warnings.extend(ws)
                if not truthy(value, warnings, f"condition of {item.item_key}"):
                    mask_subtree(item)
                    continue
            if item.kind == "group":
                walk(item.children)
            elif item.kind == "pageBreak":
                pages.append([])
            else:
                answer = _answer_of(session, item.item_key)
                if item.kind == "question":
                    visible_questions.append(item.item_key)
                pages[-1].append(_render_leaf(item, ctx, answer, warnings))

    walk(session.presentation)
    nonempty = [p for p in pages if p]
    if not nonempty:
        nonempty = [[]]
    return _View(nonempty, warnings, visible_questions)


def _answer_of(session: SurveySession, item_key: str):
    slots = session.buffer.get(item_key)
    if not slots:
        return None
    # One response slot per question; return its raw value.
    for raw in slots.values():
        return raw
    return None


def snapshot(session: SurveySession) -> RenderedSnapshot:
    view = _compute_view(session)
    if session.page_index >= len(view.pages):
        session.page_index = len(view.pages) - 1
    idx = session.page_index
    page_failures = view.failures_on(idx)
    last = idx == len(view.pages) - 1
    return RenderedSnapshot(
        page_index=idx,
        page_count=len(view.pages),
        items=tuple(view.pages[idx]),
        can_go_prev=idx > 0,
        can_go_next=not last and not page_failures,
        can_submit=last and not page_failures,
        warnings=tuple(view.warnings),
    )


def _normalized_answer(slot: ResponseSlotSpec, value) -> object:
    if slot.kind in ("singleChoice",):
        if not isinstance(value, Value) or value.kind is not ValueKind.TEXT:
            raise SlotKindMismatchError("singleChoice expects an option key")
        if value.payload != "" and value.payload not in {o.key for o in slot.options}:
            raise SlotKindMismatchError(f"unknown option '{value.payload}'")
        return value
    if slot.kind == "multipleChoice":
        if isinstance(value, Value):
            raise SlotKindMismatchError("multipleChoice expects a list of option keys")
        keys = list(value)
        known = [o.key for o in slot.options]
        bad = [k for k in keys if k not in known]
        if bad:
            raise SlotKindMismatchError(f"unknown option '{bad[0]}'")
        # normalize to definition order, deduplicated
        picked = set(keys)
        return tuple(k for k in known if k in picked)
    if not isinstance(value, Value):
        raise SlotKindMismatchError(f"{slot.kind} expects a scalar value")
    expected = {
        "textInput": ValueKind.TEXT,
        "numberInput": ValueKind.NUMBER,
        "dateInput": ValueKind.TIMESTAMP,
    }[slot.kind]
    if value.kind is not expected:
        raise SlotKindMismatchError(
            f"{slot.kind} expects {expected.name.lower()}, got {value.kind.name.lower()}"
        )
    return value


def apply_answer(
    session: SurveySession, item_key: str, slot_key: str, value
) -> RenderedSnapshot:
    """Buffer one answer and re-render. Hidden items keep their buffers."""
    item = session.question_item(item_key)
    slot = item.response_slot()
    if slot.slot_key != slot_key:
        raise UnknownItemError(f"item '{item_key}' has no slot '{slot_key}'")
    session.buffer.setdefault(item_key, {})[slot_key] = _normalized_answer(slot, value)
    return snapshot(session)


def navigate(session: SurveySession, direction: str) -> RenderedSnapshot:
    view = _compute_view(session)
    if session.page_index >= len(view.pages):
        session.page_index = len(view.pages) - 1
    if direction == "prev":
        if session.page_index == 0:
            raise AtBoundaryError("already on the first page")
        session.page_index -= 1
        return snapshot(session)
    if direction != "next":
        raise ValueError("direction must be 'next' or 'prev'")
    if session.page_index == len(view.pages) - 1:
        raise AtBoundaryError("already on the last page")
    failures = view.failures_on(session.page_index)
    if failures:
        raise NavigationBlockedError(failures)
    session.page_index += 1
    return snapshot(session)


def _is_answered(raw) -> bool:
    if raw is None:
        return False
    if isinstance(raw, (list, tuple)):
        return len(raw) > 0
    if isinstance(raw, Value):
        if raw.kind is ValueKind.TEXT:
            return raw.payload != ""
        return not raw.is_undefined
    return False


def finalize(session: SurveySession, clock: int) -> SurveyResponse:
    """Build the submitted response from items visible at submit time.

    Hidden items' buffered answers are excluded; hard validation failures
    on any visible page block the submit.
    """
    view = _compute_view(session)
    failures = view.all_failures()
    if failures:
        raise SubmitBlockedError(failures)
    items = []
    for item_key in view.visible_questions:
        answers = session.buffer.get(item_key, {})
        slots = tuple(
            ResponseSlot(slot_key, raw if not isinstance(raw, list) else tuple(raw))
            for slot_key, raw in answers.items()
            if _is_answered(raw)
        )
        if slots:
            items.append(ResponseItem(item_key, slots))
    return SurveyResponse(
        survey_key=session.definition.survey_key,
        version_id=session.definition.version_id,
        participant_ref=session.participant_ref,
        opened_at=session.opened_at,
        submitted_at=clock,
        items=tuple(items),
    )


# -- snapshot document ----------------------------------------------------------------


def _texts_doc(texts: dict[str, str], locale: str | None) -> dict[str, str]:
    if locale is None:
        return {k: texts[k] for k in sorted(texts)}
    chosen = pick_locale(texts, locale)
    return {chosen: texts[chosen]}


def _encode_answer(raw) -> dict:
    if isinstance(raw, tuple):
        return {"keys": list(raw)}
    return encode_value(raw)


def snapshot_to_doc(snap: RenderedSnapshot, locale: str | None = None) -> dict:
    """Canonical JSON form of a snapshot; this is the UI contract."""
    items = []
    for item in snap.items:
        doc: dict = {"itemKey": item.item_key, "kind": item.kind}
        comps = [
            {"role": role, "text": _texts_doc(texts, locale)}
            for role, texts in item.components
        ]
        if comps:
            doc["components"] = comps
        if item.slot is not None:
            slot: dict = {"slotKey": item.slot.slot_key, "kind": item.slot.kind}
            if item.slot.options:
                slot["options"] = [
                    {
                        "key": o.key,
                        "label": _texts_doc(o.labels, locale),
                        "visible": o.visible,
                    }
                    for o in item.slot.options
                ]
            if item.slot.max_len is not None:
                slot["maxLen"] = item.slot.max_len
            if item.slot.min_value is not None:
                slot["min"] = item.slot.min_value
            if item.slot.max_value is not None:
                slot["max"] = item.slot.max_value
            if item.slot.min_date is not None:
                slot["min"] = item.slot.min_date
            if item.slot.max_date is not None:
                slot["max"] = item.slot.max_date
            doc["slot"] = slot
        if item.answer is not None:
            doc["answer"] = _encode_answer(item.answer)
        if item.validations:
            doc["validations"] = [
                {
                    "key": v.key,
                    "severity": v.severity,
                    "passed": v.passed,
                    "message": _texts_doc(v.messages, locale),
                }
                for v in item.validations
            ]
        items.append(doc)
    return {
        "pageIndex": snap.page_index,
        "pageCount": snap.page_count,
        "canGoPrev": snap.can_go_prev,
        "canGoNext": snap.can_go_next,
        "canSubmit": snap.can_submit,
        "items": items,
        "warnings": list(snap.warnings),
    }
