"""Persistence: collections of JSON documents with CAS writes, journaling,
accounts and one-time codes, export, and cleanup."""

from .accounts import (
    Account,
    FAST_SCRYPT,
    OneTimeCode,
    Profile,
    ScryptParams,
    account_from_doc,
    account_to_doc,
    code_from_doc,
    code_to_doc,
    email_valid,
    hash_password,
    normalize_email,
    verify_password,
)
from .base import (
    ACCOUNTS,
    CODES,
    CONFIGS,
    CONSENTS,
    CasOp,
    ConflictError,
    DISPATCH_STATE,
    DeleteOp,
    LATEST_RESPONSES,
    LEASES,
    MESSAGES,
    NOTIFICATIONS,
    Op,
    PROFILE_INDEX,
    PutOp,
    RESPONSES,
    STATES,
    SURVEYS,
    SURVEY_HEADS,
    StoreError,
    TEMPLATES,
    UniqueViolationError,
    UnknownStudyError,
    state_key,
)
from .cleanup import cleanup_unverified
from .export import export_responses
from .filestore import FileStore
from .memory import MemoryStore

__all__ = [
    "ACCOUNTS",
    "Account",
    "CODES",
    "CONFIGS",
    "CONSENTS",
    "CasOp",
    "ConflictError",
    "DISPATCH_STATE",
    "DeleteOp",
    "FAST_SCRYPT",
    "FileStore",
    "LATEST_RESPONSES",
    "LEASES",
    "MESSAGES",
    "MemoryStore",
    "NOTIFICATIONS",
    "OneTimeCode",
    "Op",
    "PROFILE_INDEX",
    "Profile",
    "PutOp",
    "RESPONSES",
    "STATES",
    "SURVEYS",
    "SURVEY_HEADS",
    "ScryptParams",
    "StoreError",
    "TEMPLATES",
    "UniqueViolationError",
    "UnknownStudyError",
    "account_from_doc",
    "account_to_doc",
    "cleanup_unverified",
    "code_from_doc",
    "code_to_doc",
    "email_valid",
    "export_responses",
    "hash_password",
    "normalize_email",
    "state_key",
    "verify_password",
]
