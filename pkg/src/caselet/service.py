"""Platform orchestration: the functions the HTTP handlers, the job
runner, and the simulator all share.

One Platform instance owns a store, a clock, and an RNG. Participant
state mutations always travel the same road: load state, run the pure
study engine, persist state + effects in one transaction with a CAS on
the state version, and re-apply on conflict (bounded retries).
"""

from __future__ import annotations

import base64
import hashlib
import hmac
import random
import threading
from dataclasses import dataclass, field
from typing import Callable, Mapping

from . import engine as survey_engine
from .clock import Clock
from .expressions import EvalContext, Value, encode_value
from .messaging import (
    MessageTemplate,
    RateLimitConfig,
    ScheduledMessage,
    Sink,
    dispatch_due,
    load_template,
)
from .store import (
    ACCOUNTS,
    CODES,
    CONFIGS,
    CONSENTS,
    DISPATCH_STATE,
    LATEST_RESPONSES,
    MESSAGES,
    NOTIFICATIONS,
    PROFILE_INDEX,
    RESPONSES,
    STATES,
    SURVEYS,
    SURVEY_HEADS,
    TEMPLATES,
    Account,
    CasOp,
    ConflictError,
    MemoryStore,
    OneTimeCode,
    Op,
    Profile,
    PutOp,
    ScryptParams,
    account_from_doc,
    account_to_doc,
    cleanup_unverified,
    code_from_doc,
    code_to_doc,
    email_valid,
    hash_password,
    normalize_email,
    state_key,
    verify_password,
)
from .study import (
    EffectBatch,
    ParticipantState,
    StudyConfig,
    StudyConfigError,
    StudyEvent,
    active_assignments,
    custom_event,
    encode_study_config,
    enter_event,
    load_study_config,
    process_event,
    state_from_doc,
    state_to_doc,
    submit_event,
    timer_event,
)
from .surveys import (
    SurveyDefinition,
    SurveyError,
    SurveyResponse,
    decode_response,
    encode_response,
    encode_survey,
    lint_survey,
    load_survey,
)

MIN_PASSWORD_LENGTH = 12
VERIFY_CODE_TTL = 72 * 3600
LOGIN_CODE_TTL = 600
SESSION_TTL = 24 * 3600
TOKEN_TTL = 24 * 3600
AUTH_ATTEMPT_LIMIT = 10
AUTH_ATTEMPT_WINDOW = 15 * 60
CAS_RETRIES = 5


class ServiceError(Exception):
    code = "Internal"
    http_status = 500

    def __init__(self, detail: str = ""):
        self.detail = detail or self.code
        super().__init__(self.detail)


class WeakPasswordError(ServiceError):
    code, http_status = "WeakPassword", 400


class InvalidEmailError(ServiceError):
    code, http_status = "InvalidEmail", 400


class InvalidCredentialsError(ServiceError):
    code, http_status = "InvalidCredentials", 401


class OtpRequiredError(ServiceError):
    code, http_status = "OtpRequired", 401


class OtpInvalidError(ServiceError):
    code, http_status = "OtpInvalid", 401


class RateLimitedError(ServiceError):
    code, http_status = "RateLimited", 429


class ConsentMissingError(ServiceError):
    code, http_status = "ConsentMissing", 409


class AlreadyEnteredError(ServiceError):
    code, http_status = "AlreadyEntered", 409


class UnknownStudyServiceError(ServiceError):
    code, http_status = "UnknownStudy", 404


class UnknownSurveyError(ServiceError):
    code, http_status = "UnknownSurvey", 404


class NotAssignedError(ServiceError):
    code, http_status = "NotAssigned", 403


class NotEnteredError(ServiceError):
    code, http_status = "NotEntered", 409


class SessionExpiredError(ServiceError):
    code, http_status = "SessionExpired", 410


class ValidationFailedError(ServiceError):
    code, http_status = "ValidationFailed", 400

    def __init__(self, detail: str, issues: list[str] | None = None):
        super().__init__(detail)
        self.issues = issues or []


class BusyError(ServiceError):
    code, http_status = "Busy", 503


# Built-in auth message templates, seeded if absent.
_BUILTIN_TEMPLATES = [
    {
        "format": "caselet-template/1",
        "templateKey": "verify-email",
        "messageType": "loginCode",
        "subject": "Confirm your email address",
        "body": 'Welcome! Your verification code is {{getEventPayload("code")}}.',
    },
    {
        "format": "caselet-template/1",
        "templateKey": "login-code",
        "messageType": "loginCode",
        "subject": "Your one-time login code",
        "body": 'Your login code is {{getEventPayload("code")}}. It expires in 10 minutes.',
    },
]


@dataclass
class _SessionRecord:
    session_id: str
    account_id: str
    profile_id: str
    study_key: str
    survey_key: str
    session: survey_engine.SurveySession
    last_active: int
    lock: threading.Lock = field(default_factory=threading.Lock)


@dataclass
class JobReport:
    kind: str
    ran: bool
    details: dict
    started_at: int
    duration_seconds: int = 0  # virtual time; jobs never read the wall clock

    def to_doc(self) -> dict:
        return {
            "kind": self.kind,
            "ran": self.ran,
            "details": dict(sorted(self.details.items())),
            "startedAt": self.started_at,
            "durationSeconds": self.duration_seconds,
        }


class Platform:
    def __init__(
        self,
        store: MemoryStore,
        clock: Clock,
        token_secret: str = "dev-secret",
        rng: random.Random | None = None,
        scrypt_params: ScryptParams | None = None,
        rate_limit: RateLimitConfig | None = None,
        sink: Sink | None = None,
        cleanup_ttl_seconds: int = 7 * 86400,
        holder_id: str = "platform",
    ):
        self.store = store
        self.clock = clock
        self.token_secret = token_secret.encode("utf-8")
        self.rng = rng if rng is not None else random.SystemRandom()
        self.scrypt_params = scrypt_params or ScryptParams()
        self.rate_limit = rate_limit or RateLimitConfig()
        self.sink = sink
        self.cleanup_ttl_seconds = cleanup_ttl_seconds
        self.holder_id = holder_id
        self.external_context: dict[str, Value] = {}
        self._sessions: dict[str, _SessionRecord] = {}
        self._sessions_lock = threading.Lock()
        self._auth_attempts: dict[str, list[int]] = {}
        self._seed_templates()

    def _seed_templates(self) -> None:
        for doc in _BUILTIN_TEMPLATES:
            key = f"global/{doc['templateKey']}"
            if self.store.get(TEMPLATES, key) is None:
                self.store.put(TEMPLATES, key, doc)

    # ------------------------------------------------------------------ auth

    def _fake_token(self) -> str:
        return base64.urlsafe_b64encode(
            bytes(self.rng.randrange(256) for _ in range(33))
        ).decode("ascii")

    def mint_token(self, account_id: str, now: int) -> str:
        expires = now + TOKEN_TTL
        payload = f"{account_id}.{expires}"
        sig = hmac.new(self.token_secret, payload.encode(), hashlib.sha256).hexdigest()[:32]
        return f"{payload}.{sig}"

    def verify_token(self, token: str, now: int) -> str:
        """Return the accountId for a valid unexpired participant token."""
        try:
            account_id, expires, sig = token.rsplit(".", 2)
            payload = f"{account_id}.{expires}"
            good = hmac.new(self.token_secret, payload.encode(), hashlib.sha256).hexdigest()[:32]
            if not hmac.compare_digest(sig, good):
                raise InvalidCredentialsError("bad token")
            if int(expires) <= now:
                raise InvalidCredentialsError("token expired")
            return account_id
        except (ValueError, IndexError):
            raise InvalidCredentialsError("bad token") from None

    def _rate_limit_auth(self, email: str, now: int) -> None:
        attempts = self._auth_attempts.setdefault(email, [])
        attempts[:] = [t for t in attempts if t > now - AUTH_ATTEMPT_WINDOW]
        if len(attempts) >= AUTH_ATTEMPT_LIMIT:
            raise RateLimitedError("too many attempts; try again later")
        attempts.append(now)

    def _account_by_email(self, email: str) -> Account | None:
        for _, doc in self.store.items(ACCOUNTS):
            if doc.get("email") == email:
                return account_from_doc(doc)
        return None

    def _new_code(self) -> str:
        return f"{self.rng.randrange(1_000_000):06d}"

    def _issue_code(self, account: Account, purpose: str, ttl: int, template_key: str) -> OneTimeCode:
        now = self.clock.now()
        code = OneTimeCode(
            account_id=account.account_id,
            code=self._new_code(),
            purpose=purpose,
            created_at=now,
            expires_at=now + ttl,
        )
        ops: list[Op] = [PutOp(CODES, f"{account.account_id}/{purpose}", code_to_doc(code))]
        ops.append(self._schedule_message_op(
            participant_id=account.account_id,
            template_key=template_key,
            due_at=now,
            payload={"code": Value.text(code.code)},
        ))
        self.store.transact(ops)
        return code

    def _schedule_message_op(
        self,
        participant_id: str,
        template_key: str,
        due_at: int,
        payload: Mapping[str, Value] | None = None,
        study_key: str | None = None,
    ) -> PutOp:
        msg_id = f"msg-{self.store.next_id('messages'):08d}"
        doc = {
            "id": msg_id,
            "participantId": participant_id,
            "templateKey": template_key,
            "dueAt": due_at,
            "status": "pending",
            "attempts": 0,
            "payload": {k: encode_value(v) for k, v in sorted((payload or {}).items())},
        }
        if study_key:
            doc["studyKey"] = study_key
        return PutOp(MESSAGES, msg_id, doc)

    def signup(self, email: str, password: str) -> tuple[str, bool]:
        """Create an unverified account; returns (token, created).

        A taken email produces the same-shaped result with an inert token,
        so responses don't leak which addresses are registered.
        """
        now = self.clock.now()
        email = normalize_email(email)
        if not email_valid(email):
            raise InvalidEmailError("email address is not valid")
        if len(password) < MIN_PASSWORD_LENGTH:
            raise WeakPasswordError(f"passwords need >= {MIN_PASSWORD_LENGTH} characters")
        if self._account_by_email(email) is not None:
            return self._fake_token(), False

        account_id = f"acc-{self.store.next_id('accounts'):06d}"
        profile = Profile(f"prf-{self.store.next_id('profiles'):06d}", "main")
        account = Account(
            account_id=account_id,
            email=email,
            password_hash=hash_password(password, self.scrypt_params),
            verified=False,
            created_at=now,
            profiles=(profile,),
        )
        self.store.transact([
            PutOp(ACCOUNTS, account_id, account_to_doc(account)),
            PutOp(PROFILE_INDEX, profile.profile_id, {"accountId": account_id}),
        ])
        self._issue_code(account, "verify", VERIFY_CODE_TTL, "verify-email")
        return self.mint_token(account_id, now), True

    _DUMMY_HASH = hash_password("timing-equalizer", ScryptParams(log_n=4, r=4, p=1))

    def login(self, email: str, password: str, otp: str | None = None) -> str:
        now = self.clock.now()
        email = normalize_email(email)
        self._rate_limit_auth(email, now)
        account = self._account_by_email(email)
        if account is None:
            verify_password(password, self._DUMMY_HASH)  # constant shape
            raise InvalidCredentialsError("invalid email or password")
        if not verify_password(password, account.password_hash):
            raise InvalidCredentialsError("invalid email or password")
        if account.otp_enabled:
            self._check_login_otp(account, otp)
        return self.mint_token(account.account_id, now)

    def _check_login_otp(self, account: Account, otp: str | None) -> None:
        now = self.clock.now()
        key = f"{account.account_id}/login"
        if otp is None:
            self._issue_code(account, "login", LOGIN_CODE_TTL, "login-code")
            raise OtpRequiredError("one-time code required; a new code was sent")
        doc = self.store.get(CODES, key)
        code = code_from_doc(doc) if doc else None
        if code is None or not code.usable(otp, now):
            raise OtpInvalidError("code invalid or expired")
        self.store.put(CODES, key, code_to_doc(code.consumed()))

    def verify_email(self, email: str, code: str) -> bool:
        now = self.clock.now()
        email = normalize_email(email)
        self._rate_limit_auth(email, now)
        account = self._account_by_email(email)
        if account is None:
            raise OtpInvalidError("code invalid or expired")
        doc = self.store.get(CODES, f"{account.account_id}/verify")
        stored = code_from_doc(doc) if doc else None
        if stored is None or not stored.usable(code, now):
            raise OtpInvalidError("code invalid or expired")
        self.store.transact([
            PutOp(CODES, f"{account.account_id}/verify", code_to_doc(stored.consumed())),
            PutOp(ACCOUNTS, account.account_id,
                  account_to_doc(Account(
                      account.account_id, account.email, account.password_hash,
                      True, account.created_at, account.profiles, account.otp_enabled))),
        ])
        return True

    def account(self, account_id: str) -> Account:
        doc = self.store.get(ACCOUNTS, account_id)
        if doc is None:
            raise InvalidCredentialsError("account gone")
        return account_from_doc(doc)

    def resolve_profile(self, account: Account, profile_id: str | None) -> Profile:
        if profile_id is None:
            return account.profiles[0]
        for p in account.profiles:
            if p.profile_id == profile_id:
                return p
        raise NotAssignedError(f"profile '{profile_id}' does not belong to this account")

    # ------------------------------------------------------------------ studies

    def register_study(self, config_doc: dict) -> StudyConfig:
        try:
            config = load_study_config(config_doc)
        except StudyConfigError as e:
            raise ValidationFailedError(str(e)) from None
        self.store.put(CONFIGS, config.study_key, encode_study_config(config))
        return config

    def study_config(self, study_key: str) -> StudyConfig:
        doc = self.store.get(CONFIGS, study_key)
        if doc is None:
            raise UnknownStudyServiceError(f"no study '{study_key}'")
        return load_study_config(doc)

    def list_studies(self) -> list[dict]:
        out = []
        for key, doc in self.store.items(CONFIGS):
            out.append({"studyKey": key, "consentVersion": doc.get("consentVersion", "1")})
        return out

    def upload_survey(self, study_key: str, survey_doc: dict) -> list[str]:
        """Validate and version a survey; returns lint warnings."""
        config = self.study_config(study_key)
        try:
            definition = load_survey(survey_doc)
        except SurveyError as e:
            raise ValidationFailedError(str(e)) from None
        if definition.survey_key not in config.survey_keys:
            raise ValidationFailedError(
                f"survey '{definition.survey_key}' is not in the study's surveyKeys"
            )
        issues = [str(i) for i in lint_survey(definition)]
        full_key = f"{study_key}/{definition.survey_key}/{definition.version_id}"
        self.store.transact([
            PutOp(SURVEYS, full_key, encode_survey(definition)),
            PutOp(SURVEY_HEADS, f"{study_key}/{definition.survey_key}",
                  {"versionId": definition.version_id}),
        ])
        return issues

    def upload_template(self, study_key: str, template_doc: dict) -> None:
        from .messaging import TemplateDocumentError

        self.study_config(study_key)
        try:
            template = load_template(template_doc)
        except TemplateDocumentError as e:
            raise ValidationFailedError(str(e)) from None
        self.store.put(TEMPLATES, f"{study_key}/{template.template_key}", template_doc)

    def current_survey(self, study_key: str, survey_key: str) -> SurveyDefinition:
        head = self.store.get(SURVEY_HEADS, f"{study_key}/{survey_key}")
        if head is None:
            raise UnknownSurveyError(f"no survey '{survey_key}' uploaded for '{study_key}'")
        doc = self.store.get(SURVEYS, f"{study_key}/{survey_key}/{head['versionId']}")
        return load_survey(doc)

    # ------------------------------------------------------------------ participant flow

    def load_state(self, study_key: str, participant_id: str) -> ParticipantState | None:
        doc = self.store.get(STATES, state_key(study_key, participant_id))
        return state_from_doc(doc) if doc else None

    def previous_responses(self, study_key: str, participant_id: str) -> dict[str, SurveyResponse]:
        out: dict[str, SurveyResponse] = {}
        prefix = f"{study_key}/{participant_id}/"
        for key, doc in self.store.items(LATEST_RESPONSES):
            if key.startswith(prefix):
                out[key[len(prefix):]] = decode_response(doc["response"])
        return out

    def participant_context(
        self, study_key: str, participant_id: str, state: ParticipantState | None = None
    ) -> EvalContext:
        state = state if state is not None else self.load_state(study_key, participant_id)
        return EvalContext(
            now=self.clock.now(),
            previous_responses=self.previous_responses(study_key, participant_id),
            participant_state=state,
            external_context=dict(self.external_context),
        )

    def _pending_message_sigs(self) -> set[tuple[str, str, int]]:
        return {
            (doc["participantId"], doc["templateKey"], doc["dueAt"])
            for _, doc in self.store.items(MESSAGES)
            if doc["status"] == "pending"
        }

    def _effect_ops(self, study_key: str, effects: EffectBatch) -> list[Op]:
        ops: list[Op] = []
        # An identical pending message (participant, template, due) is never
        # queued twice: re-running a job at the same instant stays a no-op.
        seen = self._pending_message_sigs()
        for m in effects.messages_to_schedule:
            sig = (m.participant_id, m.template_key, m.due_at)
            if sig in seen:
                continue
            seen.add(sig)
            ops.append(self._schedule_message_op(
                m.participant_id, m.template_key, m.due_at, study_key=study_key
            ))
        for c in effects.messages_to_cancel:
            for key, doc in self.store.items(MESSAGES):
                if (
                    doc["status"] == "pending"
                    and doc["participantId"] == c.participant_id
                    and doc["templateKey"] == c.template_key
                ):
                    cancelled = dict(doc)
                    cancelled["status"] = "cancelled"
                    ops.append(PutOp(MESSAGES, key, cancelled))
        for n in effects.external_notifications:
            nid = f"ntf-{self.store.next_id('notifications'):08d}"
            ops.append(PutOp(NOTIFICATIONS, nid, {
                "id": nid,
                "endpointKey": n.endpoint_key,
                "url": n.url,
                "payload": {k: encode_value(v) for k, v in sorted(n.payload.items())},
            }))
        return ops

    def apply_event(
        self,
        study_key: str,
        participant_id: str,
        event: StudyEvent,
        extra_ops: Callable[[], list[Op]] | None = None,
        initial_state: ParticipantState | None = None,
    ) -> tuple[ParticipantState, EffectBatch]:
        """Run the study engine and persist atomically, retrying on CAS races."""
        config = self.study_config(study_key)
        for _ in range(CAS_RETRIES):
            state = self.load_state(study_key, participant_id)
            if state is None:
                if initial_state is None:
                    raise NotEnteredError(f"'{participant_id}' has not entered '{study_key}'")
                state = initial_state
            new_state, effects = process_event(
                config,
                state,
                event,
                external_context=self.external_context,
                previous_responses=self.previous_responses(study_key, participant_id),
            )
            ops: list[Op] = [CasOp(
                STATES,
                state_key(study_key, participant_id),
                state_to_doc(new_state),
                state.version,
            )]
            ops.extend(self._effect_ops(study_key, effects))
            if extra_ops is not None:
                ops.extend(extra_ops())
            try:
                self.store.transact(ops)
                return new_state, effects
            except ConflictError:
                continue
        raise BusyError("state is contended; retry later")

    def enter_study(
        self, account: Account, profile_id: str, study_key: str, consent_version: str
    ) -> tuple[ParticipantState, EffectBatch]:
        config = self.study_config(study_key)
        profile = self.resolve_profile(account, profile_id)
        if consent_version != config.consent_version:
            raise ConsentMissingError(
                f"study requires consent version '{config.consent_version}'"
            )
        if self.load_state(study_key, profile.profile_id) is not None:
            raise AlreadyEnteredError("this profile already entered the study")
        now = self.clock.now()
        consent_op = PutOp(CONSENTS, f"{study_key}/{profile.profile_id}", {
            "profileId": profile.profile_id,
            "studyKey": study_key,
            "consentedAt": now,
            "consentVersion": consent_version,
        })
        initial = ParticipantState(profile.profile_id, study_key)
        return self.apply_event(
            study_key,
            profile.profile_id,
            enter_event(now),
            extra_ops=lambda: [consent_op],
            initial_state=initial,
        )

    def assignments(self, study_key: str, participant_id: str) -> list[dict]:
        state = self.load_state(study_key, participant_id)
        if state is None:
            raise NotEnteredError(f"'{participant_id}' has not entered '{study_key}'")
        out = []
        for a in active_assignments(state, self.clock.now()):
            doc = {"surveyKey": a.survey_key, "category": a.category}
            if a.valid_from is not None:
                doc["validFrom"] = a.valid_from
            if a.valid_until is not None:
                doc["validUntil"] = a.valid_until
            out.append(doc)
        return out

    # ------------------------------------------------------------------ survey sessions

    def _expire_sessions(self, now: int) -> None:
        with self._sessions_lock:
            dead = [
                sid for sid, rec in self._sessions.items()
                if now - rec.last_active > SESSION_TTL
            ]
            for sid in dead:
                del self._sessions[sid]

    def open_session(
        self, account: Account, profile_id: str | None, study_key: str, survey_key: str
    ) -> tuple[str, survey_engine.RenderedSnapshot]:
        now = self.clock.now()
        self._expire_sessions(now)
        profile = self.resolve_profile(account, profile_id)
        state = self.load_state(study_key, profile.profile_id)
        if state is None:
            raise NotEnteredError(f"profile has not entered '{study_key}'")
        live = {a.survey_key for a in active_assignments(state, now)}
        if survey_key not in live:
            raise NotAssignedError(f"survey '{survey_key}' is not assigned")
        definition = self.current_survey(study_key, survey_key)
        ctx = self.participant_context(study_key, profile.profile_id, state)
        counter = self.store.next_id("sessions")
        seed = counter * 0x9E3779B9 + len(profile.profile_id)
        session, snap = survey_engine.start_session(
            definition, ctx, seed=seed, clock=now, participant_ref=profile.profile_id
        )
        record = _SessionRecord(
            session_id=f"ses-{counter:08d}",
            account_id=account.account_id,
            profile_id=profile.profile_id,
            study_key=study_key,
            survey_key=survey_key,
            session=session,
            last_active=now,
        )
        with self._sessions_lock:
            self._sessions[record.session_id] = record
        return record.session_id, snap

    def _session(self, session_id: str, account_id: str) -> _SessionRecord:
        now = self.clock.now()
        self._expire_sessions(now)
        with self._sessions_lock:
            record = self._sessions.get(session_id)
        if record is None or record.account_id != account_id:
            # Unknown and expired are indistinguishable on purpose.
            raise SessionExpiredError("session expired or unknown")
        record.last_active = now
        return record

    def answer(self, account_id: str, session_id: str, item_key: str, slot_key: str, value):
        record = self._session(session_id, account_id)
        with record.lock:
            return survey_engine.apply_answer(record.session, item_key, slot_key, value)

    def answer_json(self, account_id: str, session_id: str, item_key: str, slot_key: str, raw):
        """Answer with a plain JSON value, coerced by the slot's kind
        (numbers become timestamps for date inputs)."""
        record = self._session(session_id, account_id)
        with record.lock:
            item = record.session.question_item(item_key)
            value = _coerce_json_answer(item.response_slot(), raw)
            return survey_engine.apply_answer(record.session, item_key, slot_key, value)

    def move(self, account_id: str, session_id: str, direction: str):
        record = self._session(session_id, account_id)
        with record.lock:
            return survey_engine.navigate(record.session, direction)

    def session_snapshot(self, account_id: str, session_id: str):
        record = self._session(session_id, account_id)
        with record.lock:
            return survey_engine.snapshot(record.session)

    def submit_session(self, account_id: str, session_id: str) -> dict:
        """Finalize; persist response + post-SUBMIT state atomically."""
        record = self._session(session_id, account_id)
        now = self.clock.now()
        with record.lock:
            response = survey_engine.finalize(record.session, now)
            response_id = f"{self.store.next_id('responses'):08d}"
            response_key = f"{record.study_key}/{response_id}"

            def extra_ops() -> list[Op]:
                doc = encode_response(response)
                return [
                    PutOp(RESPONSES, response_key, {"studyKey": record.study_key, "response": doc}),
                    PutOp(
                        LATEST_RESPONSES,
                        f"{record.study_key}/{record.profile_id}/{response.survey_key}",
                        {"participantId": record.profile_id, "response": doc},
                    ),
                ]

            self.apply_event(
                record.study_key,
                record.profile_id,
                submit_event(response, now),
                extra_ops=extra_ops,
            )
            with self._sessions_lock:
                self._sessions.pop(session_id, None)
        return {
            "responseId": response_id,
            "submittedAt": now,
            "assignments": self.assignments(record.study_key, record.profile_id),
        }

    # ------------------------------------------------------------------ custom events + jobs

    def trigger_custom_event(
        self,
        study_key: str,
        event_key: str,
        payload: Mapping[str, Value],
        participant_ids: list[str] | None = None,
    ) -> dict:
        self.study_config(study_key)
        targets = []
        prefix = f"{study_key}/"
        for key, doc in self.store.items(STATES):
            if key.startswith(prefix):
                pid = doc["participantId"]
                if participant_ids is None or pid in participant_ids:
                    targets.append(pid)
        now = self.clock.now()
        processed, errors = 0, []
        for pid in targets:
            try:
                self.apply_event(study_key, pid, custom_event(event_key, payload, now))
                processed += 1
            except ServiceError as e:
                errors.append(f"{pid}: {e.detail}")
        return {"matched": len(targets), "processed": processed, "errors": errors}

    def message_queue(self) -> "StoreMessageQueue":
        return StoreMessageQueue(self.store)

    def run_job(self, kind: str, sink: Sink | None = None) -> JobReport:
        now = self.clock.now()
        if kind not in ("timer", "messages", "cleanup"):
            raise ValidationFailedError(f"unknown job '{kind}'")
        if not self.store.acquire_lease(f"job:{kind}", self.holder_id, 300, now):
            return JobReport(kind, ran=False, details={"reason": "already running"}, started_at=now)
        try:
            if kind == "timer":
                details = self._timer_job(now)
            elif kind == "messages":
                use_sink = sink or self.sink
                if use_sink is None:
                    raise ValidationFailedError("no message sink configured")
                report = dispatch_due(self.message_queue(), now, self.rate_limit, use_sink)
                details = {"sent": report.sent, "deferred": report.deferred, "failed": report.failed}
            else:
                removed = cleanup_unverified(self.store, self.cleanup_ttl_seconds, now)
                details = {"removed": removed}
            return JobReport(kind, ran=True, details=details, started_at=now)
        finally:
            self.store.release_lease(f"job:{kind}", self.holder_id)

    def _timer_job(self, now: int) -> dict:
        participants = 0
        scheduled = 0
        errors: list[str] = []
        for study_key, _ in self.store.items(CONFIGS):
            prefix = f"{study_key}/"
            pids = [
                doc["participantId"]
                for key, doc in self.store.items(STATES)
                if key.startswith(prefix) and doc["studyStatus"] == "active"
            ]
            for pid in pids:
                try:
                    _, effects = self.apply_event(study_key, pid, timer_event(now))
                    participants += 1
                    scheduled += len(effects.messages_to_schedule)
                except ServiceError as e:
                    errors.append(f"{study_key}/{pid}: {e.detail}")
        details = {"participants": participants, "messagesScheduled": scheduled}
        if errors:
            details["errors"] = len(errors)
        return details


def _coerce_json_answer(slot, raw):
    from .engine import SlotKindMismatchError

    if isinstance(raw, list):
        if not all(isinstance(k, str) for k in raw):
            raise SlotKindMismatchError("option keys must be text")
        return list(raw)
    if isinstance(raw, bool):
        return Value.boolean(raw)
    if isinstance(raw, (int, float)):
        if slot is not None and slot.kind == "dateInput":
            return Value.timestamp(int(raw))
        return Value.number(raw)
    if isinstance(raw, str):
        return Value.text(raw)
    raise SlotKindMismatchError(f"unsupported answer value: {type(raw).__name__}")


# ---------------------------------------------------------------------- store queue


class StoreMessageQueue:
    """MessageQueue over the store's messages collection."""

    def __init__(self, store: MemoryStore):
        self.store = store

    def _to_message(self, doc: dict) -> ScheduledMessage:
        from .expressions import decode_value

        return ScheduledMessage(
            id=doc["id"],
            participant_id=doc["participantId"],
            template_key=doc["templateKey"],
            due_at=int(doc["dueAt"]),
            status=doc["status"],
            attempts=int(doc["attempts"]),
            context_payload={k: decode_value(v) for k, v in doc.get("payload", {}).items()},
        )

    def due_pending(self, clock: int) -> list[ScheduledMessage]:
        due = [
            self._to_message(doc)
            for _, doc in self.store.items(MESSAGES)
            if doc["status"] == "pending" and doc["dueAt"] <= clock
        ]
        return sorted(due, key=lambda m: (m.due_at, m.id))

    def _doc(self, msg_id: str) -> dict:
        doc = self.store.get(MESSAGES, msg_id)
        if doc is None:
            raise KeyError(msg_id)
        return doc

    def template_for(self, msg: ScheduledMessage) -> MessageTemplate:
        doc = self._doc(msg.id)
        study = doc.get("studyKey")
        template_doc = None
        if study:
            template_doc = self.store.get(TEMPLATES, f"{study}/{msg.template_key}")
        if template_doc is None:
            template_doc = self.store.get(TEMPLATES, f"global/{msg.template_key}")
        if template_doc is None:
            raise KeyError(f"no template '{msg.template_key}'")
        return load_template(template_doc)

    def render_inputs(self, msg: ScheduledMessage, clock: int) -> tuple[str, EvalContext]:
        doc = self._doc(msg.id)
        account_id = msg.participant_id
        index = self.store.get(PROFILE_INDEX, msg.participant_id)
        if index is not None:
            account_id = index["accountId"]
        account_doc = self.store.get(ACCOUNTS, account_id)
        email = account_doc["email"] if account_doc else f"{msg.participant_id}@unknown.invalid"
        state = None
        study = doc.get("studyKey")
        if study:
            state_doc = self.store.get(STATES, state_key(study, msg.participant_id))
            if state_doc:
                state = state_from_doc(state_doc)
        ctx = EvalContext(
            now=clock,
            participant_state=state,
            event_payload=dict(msg.context_payload),
        )
        return email, ctx

    def _update(self, msg_id: str, **changes) -> None:
        doc = self._doc(msg_id)
        if doc["status"] != "pending":
            raise ValueError(f"message {msg_id} is {doc['status']}, not pending")
        doc.update(changes)
        self.store.put(MESSAGES, msg_id, doc)

    def mark_sent(self, msg_id: str, clock: int) -> None:
        self._update(msg_id, status="sent")
        state = self.store.get(DISPATCH_STATE, "sends") or {"times": []}
        times = state["times"][-999:] + [clock]
        self.store.put(DISPATCH_STATE, "sends", {"times": times})

    def reschedule(self, msg_id: str, due_at: int, attempts: int) -> None:
        self._update(msg_id, dueAt=due_at, attempts=attempts)

    def mark_failed(self, msg_id: str, attempts: int) -> None:
        self._update(msg_id, status="failed", attempts=attempts)

    def sent_count_since(self, cutoff: int) -> int:
        state = self.store.get(DISPATCH_STATE, "sends")
        if state is None:
            return 0
        return sum(1 for t in state["times"] if t > cutoff)
