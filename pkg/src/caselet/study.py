"""Event-driven study engine over persistent participant state.

process_event is a pure function: given a study configuration, a state
record, and one event, it returns the successor state plus an EffectBatch
of side effects for the hosting layer to perform (message scheduling,
cancellations, external notifications). Rules fire in configuration order;
their actions apply in order and see the effects of earlier actions.

SUBMIT events do fixed bookkeeping before any rule runs: the submission
time is recorded and the first matching assignment for that survey is
consumed. Every processed event bumps the state version by exactly one,
which is what the store's optimistic-concurrency write checks against.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Union

from .canonical import canonical_json, sorted_map
from .expressions import (
    EvalContext,
    Expr,
    ExpressionError,
    Value,
    ValueKind,
    decode as decode_expr,
    decode_value,
    encode as encode_expr,
    encode_value,
    evaluate,
    truthy,
    validate as validate_expr,
)
from .surveys import SurveyResponse, decode_response, encode_response

FORMAT_RULES = "caselet-rules/1"

STATUSES = ("active", "paused", "finished")
CATEGORIES = ("prio", "normal", "optional")
_CATEGORY_RANK = {c: i for i, c in enumerate(CATEGORIES)}

EVENT_KINDS = ("ENTER", "SUBMIT", "TIMER", "CUSTOM")


class StudyConfigError(Exception):
    """Malformed or inconsistent caselet-rules/1 document."""


# -- participant state ----------------------------------------------------------------


@dataclass(frozen=True)
class Assignment:
    survey_key: str
    category: str
    valid_from: int | None = None
    valid_until: int | None = None

    def __post_init__(self):
        if self.category not in CATEGORIES:
            raise ValueError(f"unknown category '{self.category}'")
        if (
            self.valid_from is not None
            and self.valid_until is not None
            and self.valid_from > self.valid_until
        ):
            raise ValueError("validFrom must be <= validUntil")


@dataclass(frozen=True)
class ParticipantState:
    participant_id: str
    study_key: str
    study_status: str = "active"
    flags: Mapping[str, Value] = field(default_factory=dict)
    assigned_surveys: tuple[Assignment, ...] = ()
    last_submissions: Mapping[str, int] = field(default_factory=dict)
    entered_at: int = 0
    version: int = 0


def active_assignments(state: ParticipantState, clock: int) -> list[Assignment]:
    """Assignments whose validity window contains the clock (inclusive),
    ordered prio -> normal -> optional, stable within category."""
    live = [
        a
        for a in state.assigned_surveys
        if (a.valid_from is None or a.valid_from <= clock)
        and (a.valid_until is None or clock <= a.valid_until)
    ]
    return sorted(live, key=lambda a: _CATEGORY_RANK[a.category])


# -- events -----------------------------------------------------------------------------


@dataclass(frozen=True)
class StudyEvent:
    kind: str
    at: int
    response: SurveyResponse | None = None  # SUBMIT only
    event_key: str | None = None  # CUSTOM only
    payload: Mapping[str, Value] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in EVENT_KINDS:
            raise ValueError(f"unknown event kind '{self.kind}'")
        if self.kind == "SUBMIT" and self.response is None:
            raise ValueError("SUBMIT events carry a finalized response")
        if self.kind == "CUSTOM" and not self.event_key:
            raise ValueError("CUSTOM events carry an eventKey")


def enter_event(at: int) -> StudyEvent:
    return StudyEvent("ENTER", at)


def submit_event(response: SurveyResponse, at: int) -> StudyEvent:
    return StudyEvent("SUBMIT", at, response=response)


def timer_event(at: int) -> StudyEvent:
    return StudyEvent("TIMER", at)


def custom_event(event_key: str, payload: Mapping[str, Value], at: int) -> StudyEvent:
    return StudyEvent("CUSTOM", at, event_key=event_key, payload=dict(payload))


# -- rules ------------------------------------------------------------------------------


@dataclass(frozen=True)
class RuleTrigger:
    kind: str
    survey_key: str | None = None  # SUBMIT filter, None = any
    event_key: str | None = None  # CUSTOM filter, None = any

    def matches(self, event: StudyEvent) -> bool:
        if self.kind != event.kind:
            return False
        if self.kind == "SUBMIT" and self.survey_key is not None:
            return event.response.survey_key == self.survey_key
        if self.kind == "CUSTOM" and self.event_key is not None:
            return event.event_key == self.event_key
        return True


@dataclass(frozen=True)
class IfAction:
    cond: Expr
    then: tuple["Action", ...]
    otherwise: tuple["Action", ...] = ()


@dataclass(frozen=True)
class UpdateFlag:
    key: str
    value_expr: Expr


@dataclass(frozen=True)
class UpdateStatus:
    status: str


@dataclass(frozen=True)
class AddSurvey:
    survey_key: str
    category: str
    valid_from_expr: Expr | None = None
    valid_until_expr: Expr | None = None


@dataclass(frozen=True)
class RemoveSurvey:
    survey_key: str
    selector: str  # first | last | all


@dataclass(frozen=True)
class ScheduleMessage:
    template_key: str
    due_expr: Expr


@dataclass(frozen=True)
class CancelMessages:
    template_key: str


@dataclass(frozen=True)
class NotifyExternal:
    endpoint_key: str
    payload: Mapping[str, Expr] = field(default_factory=dict)


Action = Union[
    IfAction,
    UpdateFlag,
    UpdateStatus,
    AddSurvey,
    RemoveSurvey,
    ScheduleMessage,
    CancelMessages,
    NotifyExternal,
]


@dataclass(frozen=True)
class StudyRule:
    on: RuleTrigger
    actions: tuple[Action, ...]

    def __post_init__(self):
        if not self.actions:
            raise ValueError("rule needs at least one action")


@dataclass(frozen=True)
class StudyConfig:
    study_key: str
    rules: tuple[StudyRule, ...] = ()
    survey_keys: frozenset[str] = frozenset()
    external_endpoints: Mapping[str, str] = field(default_factory=dict)
    consent_version: str = "1"


# -- effects ------------------------------------------------------------------------------


@dataclass(frozen=True)
class MessageToSchedule:
    participant_id: str
    template_key: str
    due_at: int


@dataclass(frozen=True)
class MessageCancellation:
    participant_id: str
    template_key: str


@dataclass(frozen=True)
class ExternalNotification:
    endpoint_key: str
    url: str
    payload: Mapping[str, Value] = field(default_factory=dict)


@dataclass
class EffectBatch:
    messages_to_schedule: list[MessageToSchedule] = field(default_factory=list)
    messages_to_cancel: list[MessageCancellation] = field(default_factory=list)
    external_notifications: list[ExternalNotification] = field(default_factory=list)
    audit_entries: list[str] = field(default_factory=list)


def effects_to_doc(effects: EffectBatch) -> dict:
    return {
        "messagesToSchedule": [
            {"participantId": m.participant_id, "templateKey": m.template_key, "dueAt": m.due_at}
            for m in effects.messages_to_schedule
        ],
        "messagesToCancel": [
            {"participantId": m.participant_id, "templateKey": m.template_key}
            for m in effects.messages_to_cancel
        ],
        "externalNotifications": [
            {
                "endpointKey": n.endpoint_key,
                "url": n.url,
                "payload": {k: encode_value(v) for k, v in sorted(n.payload.items())},
            }
            for n in effects.external_notifications
        ],
        "auditEntries": list(effects.audit_entries),
    }


# -- the engine -----------------------------------------------------------------------------


class _StateDraft:
    """Mutable working copy; also satisfies the StateReader protocol, so
    actions evaluated later see the effects of earlier ones."""

    def __init__(self, state: ParticipantState):
        self.participant_id = state.participant_id
        self.study_key = state.study_key
        self.study_status = state.study_status
        self.flags = dict(state.flags)
        self.assigned_surveys = list(state.assigned_surveys)
        self.last_submissions = dict(state.last_submissions)
        self.entered_at = state.entered_at
        self.version = state.version

    def freeze(self) -> ParticipantState:
        return ParticipantState(
            participant_id=self.participant_id,
            study_key=self.study_key,
            study_status=self.study_status,
            flags=dict(self.flags),
            assigned_surveys=tuple(self.assigned_surveys),
            last_submissions=dict(self.last_submissions),
            entered_at=self.entered_at,
            version=self.version,
        )


def _as_timestamp(value: Value) -> int | None:
    if value.kind is ValueKind.TIMESTAMP:
        return value.payload
    if value.kind is ValueKind.NUMBER:
        return int(value.payload)  # truncation toward zero
    return None


def _value_text(value: Value) -> str:
    return canonical_json(encode_value(value)) if not value.is_undefined else "undefined"


class _Runner:
    def __init__(self, config: StudyConfig, draft: _StateDraft, ctx: EvalContext, effects: EffectBatch):
        self.config = config
        self.draft = draft
        self.ctx = ctx
        self.effects = effects

    def audit(self, entry: str) -> None:
        self.effects.audit_entries.append(entry)

    def eval(self, expr: Expr) -> Value:
        value, _ = evaluate(expr, self.ctx)
        return value

    def run_actions(self, actions: Iterable[Action]) -> None:
        for action in actions:
            self.apply(action)

    def apply(self, action: Action) -> None:
        if isinstance(action, IfAction):
            branch = truthy(self.eval(action.cond))
            self.audit(f"IF -> {'then' if branch else 'else'}")
            self.run_actions(action.then if branch else action.otherwise)
        elif isinstance(action, UpdateFlag):
            value = self.eval(action.value_expr)
            if value.is_undefined:
                self.draft.flags.pop(action.key, None)
                self.audit(f"UPDATE_FLAG {action.key} cleared (undefined)")
            else:
                self.draft.flags[action.key] = value
                self.audit(f"UPDATE_FLAG {action.key}={_value_text(value)}")
        elif isinstance(action, UpdateStatus):
            self.draft.study_status = action.status
            self.audit(f"UPDATE_STATUS {action.status}")
        elif isinstance(action, AddSurvey):
            valid_from = valid_until = None
            if action.valid_from_expr is not None:
                valid_from = _as_timestamp(self.eval(action.valid_from_expr))
            if action.valid_until_expr is not None:
                valid_until = _as_timestamp(self.eval(action.valid_until_expr))
            if valid_from is not None and valid_until is not None and valid_from > valid_until:
                self.audit(
                    f"ADD_SURVEY {action.survey_key} skipped (empty validity window)"
                )
                return
            self.draft.assigned_surveys.append(
                Assignment(action.survey_key, action.category, valid_from, valid_until)
            )
            window = ""
            if valid_from is not None:
                window += f" from={valid_from}"
            if valid_until is not None:
                window += f" until={valid_until}"
            self.audit(f"ADD_SURVEY {action.survey_key} {action.category}{window}")
        elif isinstance(action, RemoveSurvey):
            removed = self._remove(action.survey_key, action.selector)
            self.audit(f"REMOVE_SURVEY {action.survey_key} {action.selector} (removed {removed})")
        elif isinstance(action, ScheduleMessage):
            due = _as_timestamp(self.eval(action.due_expr))
            if due is None:
                self.audit(f"SCHEDULE_MESSAGE {action.template_key} skipped (due undefined)")
                return
            self.effects.messages_to_schedule.append(
                MessageToSchedule(self.draft.participant_id, action.template_key, due)
            )
            self.audit(f"SCHEDULE_MESSAGE {action.template_key} due={due}")
        elif isinstance(action, CancelMessages):
            self.effects.messages_to_cancel.append(
                MessageCancellation(self.draft.participant_id, action.template_key)
            )
            self.audit(f"CANCEL_MESSAGES {action.template_key}")
        elif isinstance(action, NotifyExternal):
            payload = {}
            for key in sorted(action.payload):
                value = self.eval(action.payload[key])
                if not value.is_undefined:
                    payload[key] = value
            self.effects.external_notifications.append(
                ExternalNotification(
                    action.endpoint_key,
                    self.config.external_endpoints.get(action.endpoint_key, ""),
                    payload,
                )
            )
            self.audit(f"NOTIFY_EXTERNAL {action.endpoint_key}")
        else:  # pragma: no cover - closed union
            raise TypeError(f"unknown action {action!r}")

    def _remove(self, survey_key: str, selector: str) -> int:
        matches = [i for i, a in enumerate(self.draft.assigned_surveys) if a.survey_key == survey_key]
        if not matches:
            return 0
        if selector == "first":
            picked = [matches[0]]
        elif selector == "last":
            picked = [matches[-1]]
        else:
            picked = matches
        for i in reversed(picked):
            del self.draft.assigned_surveys[i]
        return len(picked)


def process_event(
    config: StudyConfig,
    state: ParticipantState,
    event: StudyEvent,
    external_context: Mapping[str, Value] | None = None,
    clock: int | None = None,
    previous_responses: Mapping[str, SurveyResponse] | None = None,
) -> tuple[ParticipantState, EffectBatch]:
    """Apply one event: fixed bookkeeping, then every matching rule in order."""
    if state.study_key != config.study_key:
        raise ValueError("state belongs to a different study")
    clock = event.at if clock is None else clock
    if event.at != clock:
        raise ValueError("event.at must equal the clock")

    draft = _StateDraft(state)
    effects = EffectBatch()

    header = f"{event.kind} at {event.at}"
    if event.kind == "SUBMIT":
        header += f" survey={event.response.survey_key}"
    if event.kind == "CUSTOM":
        header += f" key={event.event_key}"
    effects.audit_entries.append(header)

    if event.kind == "ENTER":
        draft.entered_at = event.at
    if event.kind == "SUBMIT":
        survey_key = event.response.survey_key
        draft.last_submissions[survey_key] = clock
        for i, a in enumerate(draft.assigned_surveys):
            if a.survey_key == survey_key:
                del draft.assigned_surveys[i]
                effects.audit_entries.append(f"consumed assignment {survey_key}")
                break

    ctx = EvalContext(
        now=clock,
        current_response=event.response,
        previous_responses=dict(previous_responses or {}),
        participant_state=draft,
        event_payload=dict(event.payload),
        external_context=dict(external_context or {}),
    )
    runner = _Runner(config, draft, ctx, effects)
    for rule in config.rules:
        if rule.on.matches(event):
            runner.run_actions(rule.actions)

    draft.version = state.version + 1
    return draft.freeze(), effects


@dataclass(frozen=True)
class SweepResult:
    participant_id: str
    effects: EffectBatch
    state: ParticipantState
    error: str | None = None


def run_timer_sweep(
    config: StudyConfig, states: Iterable[ParticipantState], clock: int
) -> Iterator[SweepResult]:
    """Fire a TIMER event for every active participant; paused and finished
    participants are skipped. Failures are isolated per participant."""
    for state in states:
        if state.study_status != "active":
            continue
        try:
            new_state, effects = process_event(config, state, timer_event(clock))
            yield SweepResult(state.participant_id, effects, new_state)
        except Exception as e:  # noqa: BLE001 - sweep must continue
            yield SweepResult(state.participant_id, EffectBatch(), state, error=str(e))


# -- state documents ---------------------------------------------------------------------


def state_to_doc(state: ParticipantState) -> dict:
    return {
        "participantId": state.participant_id,
        "studyKey": state.study_key,
        "studyStatus": state.study_status,
        "flags": {k: encode_value(v) for k, v in sorted(state.flags.items())},
        "assignedSurveys": [
            {
                "surveyKey": a.survey_key,
                "category": a.category,
                **({"validFrom": a.valid_from} if a.valid_from is not None else {}),
                **({"validUntil": a.valid_until} if a.valid_until is not None else {}),
            }
            for a in state.assigned_surveys
        ],
        "lastSubmissions": sorted_map(dict(state.last_submissions)),
        "enteredAt": state.entered_at,
        "version": state.version,
    }


def state_from_doc(doc: dict) -> ParticipantState:
    try:
        return ParticipantState(
            participant_id=doc["participantId"],
            study_key=doc["studyKey"],
            study_status=doc["studyStatus"],
            flags={k: decode_value(v) for k, v in doc.get("flags", {}).items()},
            assigned_surveys=tuple(
                Assignment(
                    a["surveyKey"], a["category"], a.get("validFrom"), a.get("validUntil")
                )
                for a in doc.get("assignedSurveys", [])
            ),
            last_submissions={k: int(v) for k, v in doc.get("lastSubmissions", {}).items()},
            entered_at=int(doc.get("enteredAt", 0)),
            version=int(doc["version"]),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise StudyConfigError(f"bad state document: {e}") from None


# -- event documents (golden logs and custom-event APIs) -------------------------------------


def event_to_doc(event: StudyEvent) -> dict:
    doc: dict = {"kind": event.kind, "at": event.at}
    if event.response is not None:
        doc["response"] = encode_response(event.response)
    if event.event_key is not None:
        doc["eventKey"] = event.event_key
    if event.payload:
        doc["payload"] = {k: encode_value(v) for k, v in sorted(event.payload.items())}
    return doc


def event_from_doc(doc: dict) -> StudyEvent:
    kind = doc["kind"]
    response = decode_response(doc["response"]) if "response" in doc else None
    payload = {k: decode_value(v) for k, v in doc.get("payload", {}).items()}
    return StudyEvent(
        kind, int(doc["at"]), response=response, event_key=doc.get("eventKey"), payload=payload
    )


# -- rules document -----------------------------------------------------------------------


def _decode_rule_expr(doc, path: str) -> Expr:
    try:
        expr = decode_expr(doc)
    except ExpressionError as e:
        raise StudyConfigError(f"invalid expression at {path}: {e}") from None
    issues = validate_expr(expr)
    if issues:
        raise StudyConfigError(f"invalid expression at {path}: {issues[0]}")
    return expr


def _decode_action(doc, path: str, config_keys: frozenset[str], endpoints) -> Action:
    if not isinstance(doc, dict) or "type" not in doc:
        raise StudyConfigError(f"action needs a 'type' at {path}")
    kind = doc["type"]
    if kind == "IF":
        cond = _decode_rule_expr(doc.get("cond"), f"{path}.cond")
        then = tuple(
            _decode_action(a, f"{path}.then[{i}]", config_keys, endpoints)
            for i, a in enumerate(doc.get("then", []))
        )
        otherwise = tuple(
            _decode_action(a, f"{path}.else[{i}]", config_keys, endpoints)
            for i, a in enumerate(doc.get("else", []))
        )
        return IfAction(cond, then, otherwise)
    if kind == "UPDATE_FLAG":
        return UpdateFlag(
            _req_text(doc, "key", path), _decode_rule_expr(doc.get("value"), f"{path}.value")
        )
    if kind == "UPDATE_STATUS":
        status = _req_text(doc, "status", path)
        if status not in STATUSES:
            raise StudyConfigError(f"unknown status '{status}' at {path}")
        return UpdateStatus(status)
    if kind == "ADD_SURVEY":
        survey_key = _req_text(doc, "surveyKey", path)
        if survey_key not in config_keys:
            raise StudyConfigError(
                f"ADD_SURVEY target '{survey_key}' not in surveyKeys at {path}"
            )
        category = _req_text(doc, "category", path)
        if category not in CATEGORIES:
            raise StudyConfigError(f"unknown category '{category}' at {path}")
        valid_from = (
            _decode_rule_expr(doc["validFrom"], f"{path}.validFrom") if "validFrom" in doc else None
        )
        valid_until = (
            _decode_rule_expr(doc["validUntil"], f"{path}.validUntil") if "validUntil" in doc else None
        )
        return AddSurvey(survey_key, category, valid_from, valid_until)
    if kind == "REMOVE_SURVEY":
        selector = doc.get("selector", "first")
        if selector not in ("first", "last", "all"):
            raise StudyConfigError(f"selector must be first|last|all at {path}")
        return RemoveSurvey(_req_text(doc, "surveyKey", path), selector)
    if kind == "SCHEDULE_MESSAGE":
        return ScheduleMessage(
            _req_text(doc, "templateKey", path), _decode_rule_expr(doc.get("due"), f"{path}.due")
        )
    if kind == "CANCEL_MESSAGES":
        return CancelMessages(_req_text(doc, "templateKey", path))
    if kind == "NOTIFY_EXTERNAL":
        endpoint = _req_text(doc, "endpointKey", path)
        if endpoint not in endpoints:
            raise StudyConfigError(f"unknown endpoint '{endpoint}' at {path}")
        payload_doc = doc.get("payload", {})
        if not isinstance(payload_doc, dict):
            raise StudyConfigError(f"'payload' must be an object at {path}")
        payload = {
            k: _decode_rule_expr(v, f"{path}.payload.{k}") for k, v in sorted(payload_doc.items())
        }
        return NotifyExternal(endpoint, payload)
    raise StudyConfigError(f"unknown action type '{kind}' at {path}")


def _req_text(doc: dict, key: str, path: str) -> str:
    v = doc.get(key)
    if not isinstance(v, str) or not v:
        raise StudyConfigError(f"'{key}' must be non-empty text at {path}")
    return v


def load_study_config(doc) -> StudyConfig:
    if not isinstance(doc, dict):
        raise StudyConfigError("rules document must be an object")
    if doc.get("format") != FORMAT_RULES:
        raise StudyConfigError(f"format must be '{FORMAT_RULES}'")
    study_key = _req_text(doc, "studyKey", "")
    survey_keys = doc.get("surveyKeys", [])
    if not isinstance(survey_keys, list) or not all(isinstance(k, str) for k in survey_keys):
        raise StudyConfigError("'surveyKeys' must be a list of text")
    keys = frozenset(survey_keys)
    endpoints = doc.get("externalEndpoints", {})
    if not isinstance(endpoints, dict) or not all(
        isinstance(k, str) and isinstance(v, str) for k, v in endpoints.items()
    ):
        raise StudyConfigError("'externalEndpoints' must map text to text")

    rules = []
    raw_rules = doc.get("rules", [])
    if not isinstance(raw_rules, list):
        raise StudyConfigError("'rules' must be a list")
    for i, r in enumerate(raw_rules):
        path = f"rules[{i}]"
        if not isinstance(r, dict):
            raise StudyConfigError(f"bad rule at {path}")
        on = r.get("on")
        if isinstance(on, str):
            on = {"kind": on}
        if not isinstance(on, dict) or on.get("kind") not in EVENT_KINDS:
            raise StudyConfigError(f"'on.kind' must be one of {EVENT_KINDS} at {path}")
        trigger = RuleTrigger(on["kind"], on.get("surveyKey"), on.get("eventKey"))
        raw_actions = r.get("actions", [])
        if not isinstance(raw_actions, list) or not raw_actions:
            raise StudyConfigError(f"rule needs a non-empty action list at {path}")
        actions = tuple(
            _decode_action(a, f"{path}.actions[{j}]", keys, endpoints)
            for j, a in enumerate(raw_actions)
        )
        rules.append(StudyRule(trigger, actions))

    consent_version = doc.get("consentVersion", "1")
    if not isinstance(consent_version, str) or not consent_version:
        raise StudyConfigError("'consentVersion' must be non-empty text")

    return StudyConfig(
        study_key=study_key,
        rules=tuple(rules),
        survey_keys=keys,
        external_endpoints=sorted_map(endpoints),
        consent_version=consent_version,
    )


def _encode_action(action: Action) -> dict:
    if isinstance(action, IfAction):
        return {
            "type": "IF",
            "cond": encode_expr(action.cond),
            "then": [_encode_action(a) for a in action.then],
            "else": [_encode_action(a) for a in action.otherwise],
        }
    if isinstance(action, UpdateFlag):
        return {"type": "UPDATE_FLAG", "key": action.key, "value": encode_expr(action.value_expr)}
    if isinstance(action, UpdateStatus):
        return {"type": "UPDATE_STATUS", "status": action.status}
    if isinstance(action, AddSurvey):
        out = {"type": "ADD_SURVEY", "surveyKey": action.survey_key, "category": action.category}
        if action.valid_from_expr is not None:
            out["validFrom"] = encode_expr(action.valid_from_expr)
        if action.valid_until_expr is not None:
            out["validUntil"] = encode_expr(action.valid_until_expr)
        return out
    if isinstance(action, RemoveSurvey):
        return {"type": "REMOVE_SURVEY", "surveyKey": action.survey_key, "selector": action.selector}
    if isinstance(action, ScheduleMessage):
        return {
            "type": "SCHEDULE_MESSAGE",
            "templateKey": action.template_key,
            "due": encode_expr(action.due_expr),
        }
    if isinstance(action, CancelMessages):
        return {"type": "CANCEL_MESSAGES", "templateKey": action.template_key}
    if isinstance(action, NotifyExternal):
        return {
            "type": "NOTIFY_EXTERNAL",
            "endpointKey": action.endpoint_key,
            "payload": {k: encode_expr(v) for k, v in sorted(action.payload.items())},
        }
    raise TypeError(f"unknown action {action!r}")  # pragma: no cover


def encode_study_config(config: StudyConfig) -> dict:
    rules = []
    for rule in config.rules:
        on: dict = {"kind": rule.on.kind}
        if rule.on.survey_key is not None:
            on["surveyKey"] = rule.on.survey_key
        if rule.on.event_key is not None:
            on["eventKey"] = rule.on.event_key
        rules.append({"on": on, "actions": [_encode_action(a) for a in rule.actions]})
    return {
        "format": FORMAT_RULES,
        "studyKey": config.study_key,
        "consentVersion": config.consent_version,
        "surveyKeys": sorted(config.survey_keys),
        "externalEndpoints": sorted_map(dict(config.external_endpoints)),
        "rules": rules,
    }
