"""Store contract: named collections of JSON documents with atomic
multi-op transactions, per-record CAS for participant states, unique
email enforcement, sequences, and job leases.

Two backends implement it: a plain in-memory store and a single-file
journaled store. Both serialize everything through one lock; the CAS op
is the concurrency primitive the study engine's single-writer-per-
participant contract builds on.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

# Collection names used by the kernel.
ACCOUNTS = "accounts"
STATES = "states"
RESPONSES = "responses"
CONFIGS = "configs"
SURVEYS = "surveys"
SURVEY_HEADS = "surveyHeads"
TEMPLATES = "templates"
MESSAGES = "messages"
CODES = "codes"
CONSENTS = "consents"
LEASES = "leases"
NOTIFICATIONS = "notifications"
PROFILE_INDEX = "profileIndex"
LATEST_RESPONSES = "latestResponses"
DISPATCH_STATE = "dispatchState"


class StoreError(Exception):
    pass


class ConflictError(StoreError):
    """Versioned write lost the race; re-read and re-apply."""


class UniqueViolationError(StoreError):
    pass


class UnknownStudyError(StoreError):
    pass


@dataclass(frozen=True)
class PutOp:
    coll: str
    key: str
    doc: dict


@dataclass(frozen=True)
class DeleteOp:
    coll: str
    key: str


@dataclass(frozen=True)
class CasOp:
    """Put that succeeds only if the stored doc's version == expected."""

    coll: str
    key: str
    doc: dict
    expected_version: int


Op = Union[PutOp, DeleteOp, CasOp]


def op_to_doc(op: Op) -> dict:
    if isinstance(op, PutOp):
        return {"op": "put", "coll": op.coll, "key": op.key, "doc": op.doc}
    if isinstance(op, DeleteOp):
        return {"op": "del", "coll": op.coll, "key": op.key}
    return {
        "op": "cas",
        "coll": op.coll,
        "key": op.key,
        "doc": op.doc,
        "expected": op.expected_version,
    }


def op_from_doc(doc: dict) -> Op:
    kind = doc["op"]
    if kind == "put":
        return PutOp(doc["coll"], doc["key"], doc["doc"])
    if kind == "del":
        return DeleteOp(doc["coll"], doc["key"])
    if kind == "cas":
        return CasOp(doc["coll"], doc["key"], doc["doc"], doc["expected"])
    raise StoreError(f"unknown journal op '{kind}'")


def state_key(study_key: str, participant_id: str) -> str:
    return f"{study_key}/{participant_id}"
