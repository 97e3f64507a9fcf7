"""Evaluation context: the read-only world an expression sees.

The context never touches the wall clock — `now` is injected by whoever
drives the evaluation (session engine, study engine, simulator). Response
and participant-state objects are consumed through the small structural
protocols below so this package stays independent of the modules that
define them.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Protocol, runtime_checkable

from .ast import Value


@runtime_checkable
class ResponseReader(Protocol):
    """What the evaluator needs from a (possibly partial) survey response."""

    def slot_value(self, item_key: str, slot_key: str) -> "Value | list[str] | None":
        """Answered value for a slot: a Value, a list of selected option
        keys for multi-choice, or None when unanswered."""
        ...

    def selected_count(self, item_key: str) -> int:
        """Total selected option keys across the item's choice slots."""
        ...


@runtime_checkable
class StateReader(Protocol):
    """What the evaluator needs from a participant state record."""

    @property
    def study_status(self) -> str: ...

    @property
    def flags(self) -> Mapping[str, Value]: ...

    @property
    def last_submissions(self) -> Mapping[str, int]: ...


@dataclass(frozen=True)
class EvalContext:
    now: int
    current_response: ResponseReader | None = None
    previous_responses: Mapping[str, ResponseReader] = field(default_factory=dict)
    participant_state: StateReader | None = None
    event_payload: Mapping[str, Value] = field(default_factory=dict)
    external_context: Mapping[str, Value] = field(default_factory=dict)


EMPTY_CONTEXT = EvalContext(now=0)
