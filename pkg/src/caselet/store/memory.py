"""In-memory reference backend; also the core the file backend reuses."""

from __future__ import annotations

import threading
from typing import Iterable

from .base import (
    ACCOUNTS,
    LEASES,
    STATES,
    CasOp,
    ConflictError,
    DeleteOp,
    Op,
    PutOp,
    StoreError,
    UniqueViolationError,
    state_key,
)


class MemoryStore:
    def __init__(self):
        self._lock = threading.RLock()
        self._collections: dict[str, dict[str, dict]] = {}
        self._counters: dict[str, int] = {}
        self._email_index: dict[str, str] = {}  # normalized email -> accountId

    # -- hooks for the journaled backend ------------------------------------

    def _persist(self, ops: list[Op]) -> None:  # pragma: no cover - overridden
        pass

    def _persist_counter(self, sequence: str, value: int) -> None:  # pragma: no cover
        pass

    # -- primitives ----------------------------------------------------------

    def _coll(self, coll: str) -> dict[str, dict]:
        return self._collections.setdefault(coll, {})

    def get(self, coll: str, key: str) -> dict | None:
        with self._lock:
            doc = self._coll(coll).get(key)
            return dict(doc) if doc is not None else None

    def items(self, coll: str) -> list[tuple[str, dict]]:
        with self._lock:
            c = self._coll(coll)
            return [(k, dict(c[k])) for k in sorted(c)]

    def keys(self, coll: str) -> list[str]:
        with self._lock:
            return sorted(self._coll(coll))

    def put(self, coll: str, key: str, doc: dict) -> None:
        self.transact([PutOp(coll, key, doc)])

    def delete(self, coll: str, key: str) -> bool:
        with self._lock:
            existed = key in self._coll(coll)
            if existed:
                self.transact([DeleteOp(coll, key)])
            return existed

    def next_id(self, sequence: str) -> int:
        with self._lock:
            value = self._counters.get(sequence, 0) + 1
            self._counters[sequence] = value
            self._persist_counter(sequence, value)
            return value

    # -- transactions ----------------------------------------------------------

    def transact(self, ops: Iterable[Op]) -> None:
        """All ops apply atomically, or none do (validation happens first)."""
        ops = list(ops)
        with self._lock:
            self._validate(ops)
            self._persist(ops)
            self._apply(ops)

    def _validate(self, ops: list[Op]) -> None:
        for op in ops:
            if isinstance(op, CasOp):
                stored = self._coll(op.coll).get(op.key)
                current = stored.get("version", 0) if stored is not None else 0
                if current != op.expected_version:
                    raise ConflictError(
                        f"{op.coll}/{op.key}: stored version {current}, expected {op.expected_version}"
                    )
            if isinstance(op, PutOp) and op.coll == ACCOUNTS:
                email = op.doc.get("email", "")
                owner = self._email_index.get(email)
                if owner is not None and owner != op.key:
                    raise UniqueViolationError(f"email already registered")

    def _apply(self, ops: list[Op]) -> None:
        for op in ops:
            coll = self._coll(op.coll)
            if isinstance(op, (PutOp, CasOp)):
                if op.coll == ACCOUNTS:
                    old = coll.get(op.key)
                    if old is not None:
                        self._email_index.pop(old.get("email", ""), None)
                    self._email_index[op.doc.get("email", "")] = op.key
                coll[op.key] = dict(op.doc)
            else:
                if op.coll == ACCOUNTS:
                    old = coll.get(op.key)
                    if old is not None:
                        self._email_index.pop(old.get("email", ""), None)
                coll.pop(op.key, None)

    # -- participant state CAS ----------------------------------------------------

    def put_state_versioned(self, state_doc: dict, expected_version: int) -> None:
        """Write a participant state iff the stored version matches.

        The new document must carry version == expected + 1; raises
        ConflictError when someone else won the race.
        """
        if state_doc.get("version") != expected_version + 1:
            raise StoreError("new state version must be expected_version + 1")
        key = state_key(state_doc["studyKey"], state_doc["participantId"])
        self.transact([CasOp(STATES, key, state_doc, expected_version)])

    # -- job leases ------------------------------------------------------------------

    def acquire_lease(self, key: str, holder: str, ttl_seconds: int, clock: int) -> bool:
        with self._lock:
            current = self._coll(LEASES).get(key)
            if (
                current is not None
                and current["holder"] != holder
                and current["expiresAt"] > clock
            ):
                return False
            self.transact(
                [PutOp(LEASES, key, {"holder": holder, "expiresAt": clock + ttl_seconds})]
            )
            return True

    def release_lease(self, key: str, holder: str) -> None:
        with self._lock:
            current = self._coll(LEASES).get(key)
            if current is not None and current["holder"] == holder:
                self.transact([DeleteOp(LEASES, key)])
