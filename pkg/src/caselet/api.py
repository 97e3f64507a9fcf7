"""HTTP surface: participant routes under /v1, management under /m/v1.

Management permission table (enforced by _check_scope; the scope matrix
test in the suite asserts exactly this):

    route                                   permission       resource
    PUT  /m/v1/studies/{s}/surveys/{k}      manage-config    study or global
    PUT  /m/v1/studies/{s}/rules            manage-config    study or global
    PUT  /m/v1/studies/{s}/templates/{k}    manage-config    study or global
    GET  /m/v1/studies/{s}/responses        read-responses   study or global
    GET  /m/v1/studies/{s}/participants     read-responses   study or global
    POST /m/v1/studies/{s}/events/custom    manage-config    study or global
    POST /m/v1/jobs/{j}/run                 admin            global only

The ``admin`` permission implies manage-config and read-responses on its
resource. Participant tokens carry no management scopes and are rejected
on every /m route. Errors are ``{"error": code, "detail": text}``.
"""

from __future__ import annotations

from typing import Any, Mapping

from fastapi import Depends, FastAPI, Header, Query, Request
from fastapi.responses import JSONResponse, Response
from pydantic import BaseModel

from .engine import (
    AtBoundaryError,
    EngineError,
    NavigationBlockedError,
    SlotKindMismatchError,
    SubmitBlockedError,
    UnknownItemError,
    snapshot_to_doc,
)
from .expressions import MalformedDocumentError, Value, decode_value
from .service import (
    InvalidCredentialsError,
    Platform,
    ServiceError,
    ValidationFailedError,
)
from .store import STATES, UnknownStudyError, export_responses
from .surveys import SurveyDocumentError


class ForbiddenError(ServiceError):
    code, http_status = "Forbidden", 403


_ENGINE_ERRORS: list[tuple[type, str, int]] = [
    (NavigationBlockedError, "NavigationBlocked", 409),
    (SubmitBlockedError, "SubmitBlocked", 409),
    (AtBoundaryError, "AtBoundary", 409),
    (UnknownItemError, "UnknownItem", 404),
    (SlotKindMismatchError, "SlotKindMismatch", 400),
]


def _error(code: str, detail: str, status: int, **extra) -> JSONResponse:
    body = {"error": code, "detail": detail}
    body.update(extra)
    return JSONResponse(body, status_code=status)


class SignupBody(BaseModel):
    email: str
    password: str


class LoginBody(BaseModel):
    email: str
    password: str
    otp: str | None = None


class VerifyBody(BaseModel):
    email: str
    code: str


class EnterBody(BaseModel):
    profileId: str | None = None
    consentVersion: str


class OpenSessionBody(BaseModel):
    profileId: str | None = None


class AnswerBody(BaseModel):
    itemKey: str
    slotKey: str
    value: Any


class MoveBody(BaseModel):
    direction: str


class CustomEventBody(BaseModel):
    eventKey: str
    payload: dict[str, Any] = {}
    participantIds: list[str] | None = None


def _decode_payload(raw: Mapping[str, Any]) -> dict[str, Value]:
    out: dict[str, Value] = {}
    for key, item in raw.items():
        if isinstance(item, bool):
            out[key] = Value.boolean(item)
        elif isinstance(item, (int, float)):
            out[key] = Value.number(item)
        elif isinstance(item, str):
            out[key] = Value.text(item)
        elif isinstance(item, dict):
            out[key] = decode_value(item)
        else:
            raise ValidationFailedError(f"payload value for '{key}' is not a scalar")
    return out


def build_app(platform: Platform, management_tokens: Mapping[str, dict] | None = None) -> FastAPI:
    app = FastAPI(title="caselet", docs_url=None, redoc_url=None)
    mgmt_tokens = dict(management_tokens or {})

    # ------------------------------------------------------------- error mapping

    @app.exception_handler(ServiceError)
    async def _service_error(_req: Request, exc: ServiceError):
        extra = {}
        if isinstance(exc, ValidationFailedError) and exc.issues:
            extra["issues"] = exc.issues
        return _error(exc.code, exc.detail, exc.http_status, **extra)

    @app.exception_handler(EngineError)
    async def _engine_error(_req: Request, exc: EngineError):
        for klass, code, status in _ENGINE_ERRORS:
            if isinstance(exc, klass):
                extra = {}
                if isinstance(exc, (NavigationBlockedError, SubmitBlockedError)):
                    extra["failures"] = [
                        {"itemKey": item, "validationKey": key} for item, key in exc.failures
                    ]
                return _error(code, str(exc), status, **extra)
        return _error("EngineError", str(exc), 500)

    @app.exception_handler(UnknownStudyError)
    async def _unknown_study(_req: Request, exc: UnknownStudyError):
        return _error("UnknownStudy", str(exc), 404)

    @app.exception_handler(SurveyDocumentError)
    async def _survey_doc_error(_req: Request, exc: SurveyDocumentError):
        return _error("ValidationFailed", str(exc), 400)

    # ------------------------------------------------------------- auth helpers

    def participant(authorization: str = Header(default="")) -> str:
        if not authorization.startswith("Bearer "):
            raise InvalidCredentialsError("missing bearer token")
        return platform.verify_token(authorization[7:], platform.clock.now())

    def management(authorization: str = Header(default="")) -> list[dict]:
        if not authorization.startswith("Bearer "):
            raise InvalidCredentialsError("missing bearer token")
        entry = mgmt_tokens.get(authorization[7:])
        if entry is None:
            raise InvalidCredentialsError("unknown management token")
        return entry.get("scopes", [])

    def _check_scope(scopes: list[dict], permission: str, study_key: str | None) -> None:
        for scope in scopes:
            perm = scope.get("permission")
            resource = scope.get("resource")
            if perm != permission and perm != "admin":
                continue
            if resource == "global":
                return
            if study_key is not None and resource == f"study:{study_key}":
                return
        raise ForbiddenError(f"requires {permission} on this study")

    def _check_global_admin(scopes: list[dict]) -> None:
        for scope in scopes:
            if scope.get("permission") == "admin" and scope.get("resource") == "global":
                return
        raise ForbiddenError("requires global admin")

    # ------------------------------------------------------------- participant group

    @app.get("/healthz")
    def healthz():
        return {"status": "ok"}

    @app.post("/v1/auth/signup", status_code=201)
    def signup(body: SignupBody):
        token, _created = platform.signup(body.email, body.password)
        return {"token": token}

    @app.post("/v1/auth/login")
    def login(body: LoginBody):
        token = platform.login(body.email, body.password, body.otp)
        return {"token": token}

    @app.post("/v1/auth/otp/verify")
    def verify(body: VerifyBody):
        platform.verify_email(body.email, body.code)
        return {"verified": True}

    @app.get("/v1/studies")
    def list_studies(_account_id: str = Depends(participant)):
        return {"studies": platform.list_studies()}

    @app.post("/v1/studies/{study_key}/enter")
    def enter(study_key: str, body: EnterBody, account_id: str = Depends(participant)):
        account = platform.account(account_id)
        state, _effects = platform.enter_study(
            account, body.profileId, study_key, body.consentVersion
        )
        return {
            "participantId": state.participant_id,
            "assignments": platform.assignments(study_key, state.participant_id),
        }

    @app.get("/v1/studies/{study_key}/assignments")
    def assignments(
        study_key: str,
        profile: str | None = Query(default=None),
        account_id: str = Depends(participant),
    ):
        account = platform.account(account_id)
        chosen = platform.resolve_profile(account, profile)
        return {"assignments": platform.assignments(study_key, chosen.profile_id)}

    @app.post("/v1/studies/{study_key}/surveys/{survey_key}/sessions", status_code=201)
    def open_session(
        study_key: str,
        survey_key: str,
        body: OpenSessionBody | None = None,
        locale: str | None = Query(default=None),
        account_id: str = Depends(participant),
    ):
        account = platform.account(account_id)
        profile_id = body.profileId if body else None
        session_id, snap = platform.open_session(account, profile_id, study_key, survey_key)
        return {"sessionId": session_id, "snapshot": snapshot_to_doc(snap, locale)}

    @app.post("/v1/sessions/{session_id}/answers")
    def answer(
        session_id: str,
        body: AnswerBody,
        locale: str | None = Query(default=None),
        account_id: str = Depends(participant),
    ):
        snap = platform.answer_json(account_id, session_id, body.itemKey, body.slotKey, body.value)
        return {"snapshot": snapshot_to_doc(snap, locale)}

    @app.post("/v1/sessions/{session_id}/move")
    def move(
        session_id: str,
        body: MoveBody,
        locale: str | None = Query(default=None),
        account_id: str = Depends(participant),
    ):
        snap = platform.move(account_id, session_id, body.direction)
        return {"snapshot": snapshot_to_doc(snap, locale)}

    @app.get("/v1/sessions/{session_id}")
    def view_session(
        session_id: str,
        locale: str | None = Query(default=None),
        account_id: str = Depends(participant),
    ):
        snap = platform.session_snapshot(account_id, session_id)
        return {"snapshot": snapshot_to_doc(snap, locale)}

    @app.post("/v1/sessions/{session_id}/submit")
    def submit(session_id: str, account_id: str = Depends(participant)):
        return {"receipt": platform.submit_session(account_id, session_id)}

    # ------------------------------------------------------------- management group

    @app.put("/m/v1/studies/{study_key}/rules")
    def upload_rules(study_key: str, doc: dict, scopes: list = Depends(management)):
        _check_scope(scopes, "manage-config", study_key)
        if doc.get("studyKey") != study_key:
            raise ValidationFailedError("studyKey in document must match the route")
        platform.register_study(doc)
        return {"ok": True}

    @app.put("/m/v1/studies/{study_key}/surveys/{survey_key}")
    def upload_survey(
        study_key: str, survey_key: str, doc: dict, scopes: list = Depends(management)
    ):
        _check_scope(scopes, "manage-config", study_key)
        if doc.get("surveyKey") != survey_key:
            raise ValidationFailedError("surveyKey in document must match the route")
        lint = platform.upload_survey(study_key, doc)
        return {"ok": True, "lint": lint}

    @app.put("/m/v1/studies/{study_key}/templates/{template_key}")
    def upload_template(
        study_key: str, template_key: str, doc: dict, scopes: list = Depends(management)
    ):
        _check_scope(scopes, "manage-config", study_key)
        if doc.get("templateKey") != template_key:
            raise ValidationFailedError("templateKey in document must match the route")
        platform.upload_template(study_key, doc)
        return {"ok": True}

    @app.get("/m/v1/studies/{study_key}/responses")
    def export(
        study_key: str,
        scopes: list = Depends(management),
        from_ts: int = Query(default=0, alias="from"),
        to_ts: int = Query(default=2**62, alias="to"),
        format: str = Query(default="ndjson"),
    ):
        _check_scope(scopes, "read-responses", study_key)
        if format not in ("ndjson", "csv"):
            raise ValidationFailedError("format must be ndjson or csv")
        data = export_responses(platform.store, study_key, from_ts, to_ts, format)
        media = "application/x-ndjson" if format == "ndjson" else "text/csv; charset=utf-8"
        return Response(content=data, media_type=media)

    @app.get("/m/v1/studies/{study_key}/participants")
    def list_participants(study_key: str, scopes: list = Depends(management)):
        _check_scope(scopes, "read-responses", study_key)
        platform.study_config(study_key)
        out = []
        prefix = f"{study_key}/"
        for key, doc in platform.store.items(STATES):
            if key.startswith(prefix):
                out.append({
                    "participantId": doc["participantId"],
                    "studyStatus": doc["studyStatus"],
                    "enteredAt": doc["enteredAt"],
                    "version": doc["version"],
                })
        return {"participants": out}

    @app.post("/m/v1/studies/{study_key}/events/custom")
    def custom_event(study_key: str, body: CustomEventBody, scopes: list = Depends(management)):
        _check_scope(scopes, "manage-config", study_key)
        try:
            payload = _decode_payload(body.payload)
        except MalformedDocumentError as e:
            raise ValidationFailedError(str(e)) from None
        report = platform.trigger_custom_event(
            study_key, body.eventKey, payload, body.participantIds
        )
        return report

    @app.post("/m/v1/jobs/{job_kind}/run")
    def run_job(job_kind: str, scopes: list = Depends(management)):
        _check_global_admin(scopes)
        return platform.run_job(job_kind).to_doc()

    return app
