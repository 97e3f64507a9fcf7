"""Accounts, profiles, one-time codes, and password hashing.

Passwords are hashed with scrypt (memory-hard) and stored with their
parameters encoded in the hash string, so parameters can be raised later
without invalidating existing credentials:

    scrypt$<log2 n>$<r>$<p>$<salt hex>$<hash hex>
"""

from __future__ import annotations

import hashlib
import hmac
import re
from dataclasses import dataclass, replace

_EMAIL_RE = re.compile(r"^[^@\s]+@[^@\s]+\.[^@\s]+$")


def normalize_email(email: str) -> str:
    return email.strip().lower()


def email_valid(email: str) -> bool:
    return bool(_EMAIL_RE.match(email))


@dataclass(frozen=True)
class ScryptParams:
    log_n: int = 14  # ~100 ms interactive on desktop hardware
    r: int = 8
    p: int = 1

    def __post_init__(self):
        if not (1 <= self.log_n <= 24):
            raise ValueError("log_n out of range")


# Cheap parameters for tests; never use outside a test process.
FAST_SCRYPT = ScryptParams(log_n=4, r=4, p=1)


def hash_password(password: str, params: ScryptParams = ScryptParams(), salt: bytes | None = None) -> str:
    import secrets

    salt = salt if salt is not None else secrets.token_bytes(16)
    digest = hashlib.scrypt(
        password.encode("utf-8"),
        salt=salt,
        n=1 << params.log_n,
        r=params.r,
        p=params.p,
        dklen=32,
    )
    return f"scrypt${params.log_n}${params.r}${params.p}${salt.hex()}${digest.hex()}"


def verify_password(password: str, encoded: str) -> bool:
    try:
        scheme, log_n, r, p, salt_hex, hash_hex = encoded.split("$")
        if scheme != "scrypt":
            return False
        digest = hashlib.scrypt(
            password.encode("utf-8"),
            salt=bytes.fromhex(salt_hex),
            n=1 << int(log_n),
            r=int(r),
            p=int(p),
            dklen=32,
        )
        return hmac.compare_digest(digest.hex(), hash_hex)
    except (ValueError, TypeError):
        return False


@dataclass(frozen=True)
class Profile:
    profile_id: str
    alias: str


@dataclass(frozen=True)
class Account:
    account_id: str
    email: str  # normalized
    password_hash: str
    verified: bool
    created_at: int
    profiles: tuple[Profile, ...]
    otp_enabled: bool = False

    def __post_init__(self):
        if not self.profiles:
            raise ValueError("accounts need at least one profile")
        if not email_valid(self.email):
            raise ValueError(f"invalid email '{self.email}'")


@dataclass(frozen=True)
class OneTimeCode:
    account_id: str
    code: str  # 6 decimal digits
    purpose: str  # login | verify
    created_at: int
    expires_at: int
    used: bool = False

    def __post_init__(self):
        if not (len(self.code) == 6 and self.code.isdigit()):
            raise ValueError("codes are 6 decimal digits")
        if self.purpose not in ("login", "verify"):
            raise ValueError("purpose must be login or verify")
        if self.expires_at <= self.created_at:
            raise ValueError("expiresAt must be after createdAt")

    def usable(self, code: str, clock: int) -> bool:
        return not self.used and self.expires_at > clock and hmac.compare_digest(self.code, code)

    def consumed(self) -> "OneTimeCode":
        return replace(self, used=True)


def account_to_doc(a: Account) -> dict:
    return {
        "accountId": a.account_id,
        "email": a.email,
        "passwordHash": a.password_hash,
        "verified": a.verified,
        "createdAt": a.created_at,
        "profiles": [{"profileId": p.profile_id, "alias": p.alias} for p in a.profiles],
        "otpEnabled": a.otp_enabled,
    }


def account_from_doc(doc: dict) -> Account:
    return Account(
        account_id=doc["accountId"],
        email=doc["email"],
        password_hash=doc["passwordHash"],
        verified=bool(doc["verified"]),
        created_at=int(doc["createdAt"]),
        profiles=tuple(Profile(p["profileId"], p["alias"]) for p in doc["profiles"]),
        otp_enabled=bool(doc.get("otpEnabled", False)),
    )


def code_to_doc(c: OneTimeCode) -> dict:
    return {
        "accountId": c.account_id,
        "code": c.code,
        "purpose": c.purpose,
        "createdAt": c.created_at,
        "expiresAt": c.expires_at,
        "used": c.used,
    }


def code_from_doc(doc: dict) -> OneTimeCode:
    return OneTimeCode(
        account_id=doc["accountId"],
        code=doc["code"],
        purpose=doc["purpose"],
        created_at=int(doc["createdAt"]),
        expires_at=int(doc["expiresAt"]),
        used=bool(doc["used"]),
    )
