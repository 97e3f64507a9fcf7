"""Template-based personalized messages: rendering, scheduling, dispatch.

Dispatch is clock-driven and deterministic. A sliding-window limiter
(persisted with the queue as a list of recent send instants) guarantees
that no window of ``window_seconds`` virtual seconds ever contains more
than ``max_per_window`` sends, across any number of dispatch calls.
Failures back off exponentially relative to the message's current due
time and give up after ``max_attempts`` is exceeded.

The reference sink is an append-only NDJSON outbox file standing in for
an HTTP-to-SMTP bridge; any sink with the same deliver() contract can be
swapped in.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Mapping, Protocol

from .canonical import ndjson_line
from .expressions import EvalContext, Value
from .surveys import (
    DEFAULT_LOCALE,
    DynamicText,
    SurveyDocumentError,
    decode_dynamic_text,
    encode_dynamic_text,
    render_dynamic_text,
)

FORMAT_TEMPLATE = "caselet-template/1"

MESSAGE_TYPES = ("reminder", "newsletter", "invitation", "loginCode")
MESSAGE_STATUSES = ("pending", "sent", "cancelled", "failed")


class MessagingError(Exception):
    pass


class MissingDefaultLocaleError(MessagingError):
    def __init__(self, template_key: str, locale: str | None):
        super().__init__(
            f"template '{template_key}' has neither locale '{locale}' nor '{DEFAULT_LOCALE}'"
        )


class SinkUnavailableError(MessagingError):
    """The delivery sink is down; defer the batch without status changes."""


class TemplateDocumentError(MessagingError):
    pass


# -- templates -----------------------------------------------------------------------


@dataclass(frozen=True)
class MessageTemplate:
    template_key: str
    message_type: str
    subject: DynamicText
    body: DynamicText

    def __post_init__(self):
        if self.message_type not in MESSAGE_TYPES:
            raise ValueError(f"unknown message type '{self.message_type}'")


@dataclass(frozen=True)
class RenderedMessage:
    subject: str
    body: str
    warnings: tuple[str, ...]


def _template_locale(template: MessageTemplate, dt: DynamicText, locale: str | None) -> str:
    if locale and locale in dt.by_locale:
        return locale
    if DEFAULT_LOCALE in dt.by_locale:
        return DEFAULT_LOCALE
    raise MissingDefaultLocaleError(template.template_key, locale)


def render_template(
    template: MessageTemplate, ctx: EvalContext, locale: str | None = None
) -> RenderedMessage:
    """Resolve all placeholders; Undefined renders as empty text plus a warning."""
    warnings: list[str] = []
    subject, ws = render_dynamic_text(
        template.subject, ctx, _template_locale(template, template.subject, locale)
    )
    warnings.extend(ws)
    body, ws = render_dynamic_text(
        template.body, ctx, _template_locale(template, template.body, locale)
    )
    warnings.extend(ws)
    return RenderedMessage(subject, body, tuple(warnings))


def load_template(doc) -> MessageTemplate:
    if not isinstance(doc, dict) or doc.get("format") != FORMAT_TEMPLATE:
        raise TemplateDocumentError(f"format must be '{FORMAT_TEMPLATE}'")
    key = doc.get("templateKey")
    if not isinstance(key, str) or not key:
        raise TemplateDocumentError("'templateKey' must be non-empty text")
    message_type = doc.get("messageType")
    if message_type not in MESSAGE_TYPES:
        raise TemplateDocumentError(f"'messageType' must be one of {MESSAGE_TYPES}")
    try:
        subject = decode_dynamic_text(doc.get("subject"), "subject")
        body = decode_dynamic_text(doc.get("body"), "body")
    except SurveyDocumentError as e:
        raise TemplateDocumentError(str(e)) from None
    return MessageTemplate(key, message_type, subject, body)


def encode_template(template: MessageTemplate) -> dict:
    return {
        "format": FORMAT_TEMPLATE,
        "templateKey": template.template_key,
        "messageType": template.message_type,
        "subject": encode_dynamic_text(template.subject),
        "body": encode_dynamic_text(template.body),
    }


# -- scheduled messages -----------------------------------------------------------------


@dataclass(frozen=True)
class ScheduledMessage:
    id: str
    participant_id: str
    template_key: str
    due_at: int
    status: str = "pending"
    attempts: int = 0
    context_payload: Mapping[str, Value] = field(default_factory=dict)

    def __post_init__(self):
        if self.status not in MESSAGE_STATUSES:
            raise ValueError(f"unknown status '{self.status}'")
        if self.attempts < 0:
            raise ValueError("attempts must be >= 0")


@dataclass(frozen=True)
class OutboxRecord:
    to: str
    subject: str
    body: str
    sent_at: int
    template_key: str
    participant_id: str


def outbox_record_to_doc(r: OutboxRecord) -> dict:
    return {
        "to": r.to,
        "subject": r.subject,
        "body": r.body,
        "sentAt": r.sent_at,
        "templateKey": r.template_key,
        "participantId": r.participant_id,
    }


@dataclass(frozen=True)
class RateLimitConfig:
    max_per_window: int = 50
    window_seconds: int = 60
    batch_size: int = 100
    max_attempts: int = 3
    backoff_base_seconds: int = 300

    def __post_init__(self):
        if self.max_per_window <= 0 or self.window_seconds <= 0 or self.batch_size <= 0:
            raise ValueError("limiter parameters must be positive")
        if self.max_attempts < 1 or self.backoff_base_seconds < 1:
            raise ValueError("retry parameters must be >= 1")


# resolver: (participant_id, context_payload, clock) -> (email, EvalContext)
Resolver = Callable[[str, Mapping[str, Value], int], tuple[str, EvalContext]]


class MessageQueue(Protocol):
    """Persistence contract dispatch_due runs against."""

    def due_pending(self, clock: int) -> list[ScheduledMessage]: ...

    def template_for(self, msg: ScheduledMessage) -> MessageTemplate: ...

    def render_inputs(self, msg: ScheduledMessage, clock: int) -> tuple[str, EvalContext]: ...

    def mark_sent(self, msg_id: str, clock: int) -> None: ...

    def reschedule(self, msg_id: str, due_at: int, attempts: int) -> None: ...

    def mark_failed(self, msg_id: str, attempts: int) -> None: ...

    def sent_count_since(self, cutoff: int) -> int: ...


class Sink(Protocol):
    def deliver(self, record: OutboxRecord) -> bool: ...


@dataclass
class DispatchReport:
    sent: int = 0
    deferred: int = 0
    failed: int = 0


def dispatch_due(
    queue: MessageQueue, clock: int, limit: RateLimitConfig, sink: Sink
) -> DispatchReport:
    """Send pending messages due by `clock`, oldest due first.

    At most batch_size messages are processed per call, and the sliding
    window allowance caps actual sends. Messages beyond the budget stay
    pending (deferred). A sink failure for one message schedules a retry
    with exponential backoff; SinkUnavailable defers everything left.
    """
    report = DispatchReport()
    due = queue.due_pending(clock)
    window_used = queue.sent_count_since(clock - limit.window_seconds)
    budget = min(limit.batch_size, max(0, limit.max_per_window - window_used))

    attempts_made = 0
    for index, msg in enumerate(due):
        if attempts_made >= budget:
            report.deferred += len(due) - index
            break
        attempts_made += 1
        email, ctx = queue.render_inputs(msg, clock)
        rendered = render_template(queue.template_for(msg), ctx)
        record = OutboxRecord(
            email, rendered.subject, rendered.body, clock, msg.template_key, msg.participant_id
        )
        try:
            delivered = sink.deliver(record)
        except SinkUnavailableError:
            report.deferred += len(due) - index
            break
        if delivered:
            queue.mark_sent(msg.id, clock)
            report.sent += 1
        else:
            attempts = msg.attempts + 1
            if attempts > limit.max_attempts:
                queue.mark_failed(msg.id, attempts)
                report.failed += 1
            else:
                backoff = limit.backoff_base_seconds * (2 ** (attempts - 1))
                queue.reschedule(msg.id, msg.due_at + backoff, attempts)
                report.deferred += 1
    return report


# -- reference implementations ---------------------------------------------------------------


class InMemoryQueue:
    """Queue for tests and the simulator; same contract as the store-backed one."""

    def __init__(self, templates: Mapping[str, MessageTemplate], resolver: Resolver):
        self._templates = dict(templates)
        self._resolver = resolver
        self._messages: dict[str, ScheduledMessage] = {}
        self._send_times: list[int] = []
        self._next = 1

    def add(
        self,
        participant_id: str,
        template_key: str,
        due_at: int,
        context_payload: Mapping[str, Value] | None = None,
    ) -> ScheduledMessage:
        msg = ScheduledMessage(
            id=f"msg-{self._next:08d}",
            participant_id=participant_id,
            template_key=template_key,
            due_at=due_at,
            context_payload=dict(context_payload or {}),
        )
        self._next += 1
        self._messages[msg.id] = msg
        return msg

    def cancel(self, participant_id: str, template_key: str) -> int:
        cancelled = 0
        for msg_id, msg in self._messages.items():
            if (
                msg.status == "pending"
                and msg.participant_id == participant_id
                and msg.template_key == template_key
            ):
                self._messages[msg_id] = replace(msg, status="cancelled")
                cancelled += 1
        return cancelled

    def all_messages(self) -> list[ScheduledMessage]:
        return [self._messages[k] for k in sorted(self._messages)]

    # MessageQueue contract

    def due_pending(self, clock: int) -> list[ScheduledMessage]:
        due = [
            m for m in self._messages.values() if m.status == "pending" and m.due_at <= clock
        ]
        return sorted(due, key=lambda m: (m.due_at, m.id))

    def template_for(self, msg: ScheduledMessage) -> MessageTemplate:
        return self._templates[msg.template_key]

    def render_inputs(self, msg: ScheduledMessage, clock: int):
        return self._resolver(msg.participant_id, msg.context_payload, clock)

    def _transition(self, msg_id: str, **changes) -> None:
        msg = self._messages[msg_id]
        if msg.status != "pending":
            raise MessagingError(f"message {msg_id} is {msg.status}, not pending")
        self._messages[msg_id] = replace(msg, **changes)

    def mark_sent(self, msg_id: str, clock: int) -> None:
        self._transition(msg_id, status="sent")
        self._send_times.append(clock)

    def reschedule(self, msg_id: str, due_at: int, attempts: int) -> None:
        self._transition(msg_id, due_at=due_at, attempts=attempts)

    def mark_failed(self, msg_id: str, attempts: int) -> None:
        self._transition(msg_id, status="failed", attempts=attempts)

    def sent_count_since(self, cutoff: int) -> int:
        return sum(1 for t in self._send_times if t > cutoff)


class CollectingSink:
    """In-memory sink; failures scriptable per call index."""

    def __init__(self, fail_on: set[int] | None = None, down: bool = False):
        self.records: list[OutboxRecord] = []
        self.calls = 0
        self.fail_on = fail_on or set()
        self.down = down

    def deliver(self, record: OutboxRecord) -> bool:
        if self.down:
            raise SinkUnavailableError("sink offline")
        call = self.calls
        self.calls += 1
        if call in self.fail_on:
            return False
        self.records.append(record)
        return True


class OutboxFileSink:
    """Append-only newline-delimited JSON outbox, UTF-8."""

    def __init__(self, path):
        self.path = path

    def deliver(self, record: OutboxRecord) -> bool:
        with open(self.path, "a", encoding="utf-8") as fh:
            fh.write(ndjson_line(outbox_record_to_doc(record)))
        return True
