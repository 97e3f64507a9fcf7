"""Removal of stale unverified accounts with a full cascade."""

from __future__ import annotations

from .base import (
    ACCOUNTS,
    CODES,
    CONSENTS,
    DeleteOp,
    LATEST_RESPONSES,
    MESSAGES,
    PROFILE_INDEX,
    RESPONSES,
    STATES,
)
from .memory import MemoryStore


def cleanup_unverified(store: MemoryStore, ttl_seconds: int, clock: int) -> int:
    """Delete accounts still unverified after ttl, cascading every record
    that references them (states, codes, consents, responses, messages,
    profile index entries). Returns the number of accounts removed."""
    if ttl_seconds <= 0:
        raise ValueError("ttl must be positive")
    removed = 0
    for account_id, doc in store.items(ACCOUNTS):
        if doc.get("verified"):
            continue
        if doc["createdAt"] + ttl_seconds > clock:
            continue
        profile_ids = {p["profileId"] for p in doc.get("profiles", [])}
        owner_ids = profile_ids | {account_id}

        ops = [DeleteOp(ACCOUNTS, account_id)]
        for key, _ in store.items(CODES):
            if key.split("/", 1)[0] == account_id:
                ops.append(DeleteOp(CODES, key))
        for key, state in store.items(STATES):
            if state.get("participantId") in profile_ids:
                ops.append(DeleteOp(STATES, key))
        for key, consent in store.items(CONSENTS):
            if consent.get("profileId") in profile_ids:
                ops.append(DeleteOp(CONSENTS, key))
        for key, wrapper in store.items(RESPONSES):
            if wrapper["response"].get("participantRef") in profile_ids:
                ops.append(DeleteOp(RESPONSES, key))
        for key, msg in store.items(MESSAGES):
            if msg.get("participantId") in owner_ids:
                ops.append(DeleteOp(MESSAGES, key))
        for key, entry in store.items(LATEST_RESPONSES):
            if entry.get("participantId") in profile_ids:
                ops.append(DeleteOp(LATEST_RESPONSES, key))
        for pid in profile_ids:
            if store.get(PROFILE_INDEX, pid) is not None:
                ops.append(DeleteOp(PROFILE_INDEX, pid))

        store.transact(ops)
        removed += 1
    return removed
