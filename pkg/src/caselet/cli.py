"""Operator command line: serve, run-job, simulate, validate, eval.

serve configuration comes from environment variables:

    CASELET_LISTEN         host:port               (default 127.0.0.1:8080)
    CASELET_STORE          journal file path       (default ./caselet.journal)
    CASELET_TOKEN_SECRET   HMAC secret for participant tokens
    CASELET_MGMT_TOKENS    management token table: inline JSON or @path
    CASELET_OUTBOX         outbox NDJSON file      (default ./outbox.ndjson)
    CASELET_CLEANUP_TTL    unverified-account TTL seconds (default 7 days)
    CASELET_MAX_PER_WINDOW / CASELET_WINDOW_SECONDS / CASELET_BATCH_SIZE /
    CASELET_MAX_ATTEMPTS / CASELET_BACKOFF_BASE    dispatch rate limits
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .clock import ManualClock, SystemClock
from .expressions import EvalContext, Value, decode_value, evaluate, parse_text
from .expressions.errors import ExpressionError
from .messaging import OutboxFileSink, RateLimitConfig, TemplateDocumentError, load_template
from .service import Platform
from .sim import ScenarioInvalidError, load_scenario, simulate
from .store import FileStore
from .study import StudyConfigError, load_study_config
from .surveys import SurveyError, lint_survey, load_survey, value_to_plain


def _env(name: str, default: str) -> str:
    return os.environ.get(name, default)


def _rate_limit_from_env() -> RateLimitConfig:
    return RateLimitConfig(
        max_per_window=int(_env("CASELET_MAX_PER_WINDOW", "50")),
        window_seconds=int(_env("CASELET_WINDOW_SECONDS", "60")),
        batch_size=int(_env("CASELET_BATCH_SIZE", "100")),
        max_attempts=int(_env("CASELET_MAX_ATTEMPTS", "3")),
        backoff_base_seconds=int(_env("CASELET_BACKOFF_BASE", "300")),
    )


def _management_tokens() -> dict:
    raw = os.environ.get("CASELET_MGMT_TOKENS", "")
    if not raw:
        return {}
    if raw.startswith("@"):
        with open(raw[1:], encoding="utf-8") as fh:
            return json.load(fh)
    return json.loads(raw)


def _build_platform(store_path: str, clock) -> Platform:
    return Platform(
        store=FileStore(store_path),
        clock=clock,
        token_secret=_env("CASELET_TOKEN_SECRET", "change-me"),
        rate_limit=_rate_limit_from_env(),
        sink=OutboxFileSink(_env("CASELET_OUTBOX", "./outbox.ndjson")),
        cleanup_ttl_seconds=int(_env("CASELET_CLEANUP_TTL", str(7 * 86400))),
        holder_id=f"pid-{os.getpid()}",
    )


def cmd_serve(args) -> int:
    import uvicorn

    from .api import build_app

    platform = _build_platform(_env("CASELET_STORE", "./caselet.journal"), SystemClock())
    app = build_app(platform, _management_tokens())
    listen = _env("CASELET_LISTEN", "127.0.0.1:8080")
    host, _, port = listen.rpartition(":")
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port), log_level="info")
    return 0


def cmd_run_job(args) -> int:
    clock = ManualClock(args.at) if args.at is not None else SystemClock()
    platform = _build_platform(args.store, clock)
    report = platform.run_job(args.kind)
    print(json.dumps(report.to_doc(), indent=2))
    return 0 if report.ran else 1


def cmd_simulate(args) -> int:
    try:
        with open(args.scenario, encoding="utf-8") as fh:
            scenario = load_scenario(json.load(fh))
        report = simulate(scenario)
    except (ScenarioInvalidError, OSError, json.JSONDecodeError) as e:
        print(f"scenario error: {e}", file=sys.stderr)
        return 1
    report.write(args.out)
    doc = report.report_doc()
    print(f"simulated {doc['studyKey']}: {doc['states']} state changes, "
          f"{doc['outboxCount']} messages sent, {len(doc['sweeps'])} sweeps")
    print(f"report written to {args.out}")
    return 0


def cmd_validate(args) -> int:
    try:
        with open(args.file, encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as e:
        print(f"cannot read document: {e}", file=sys.stderr)
        return 1
    fmt = doc.get("format", "") if isinstance(doc, dict) else ""
    try:
        if fmt.startswith("caselet-survey/"):
            definition = load_survey(doc)
            issues = lint_survey(definition)
            for issue in issues:
                print(f"lint: {issue}")
            print(f"survey '{definition.survey_key}' ok "
                  f"({len(list(definition.walk_items()))} items, {len(issues)} lint issues)")
        elif fmt.startswith("caselet-rules/"):
            config = load_study_config(doc)
            print(f"rules for '{config.study_key}' ok ({len(config.rules)} rules)")
        elif fmt.startswith("caselet-template/"):
            template = load_template(doc)
            print(f"template '{template.template_key}' ok")
        else:
            print(f"unknown document format: {fmt!r}", file=sys.stderr)
            return 1
    except (SurveyError, StudyConfigError, TemplateDocumentError) as e:
        print(f"invalid: {e}", file=sys.stderr)
        return 1
    return 0


def _context_from_file(path: str | None) -> EvalContext:
    if path is None:
        return EvalContext(now=0)
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)

    def values(m):
        out = {}
        for k, v in (m or {}).items():
            if isinstance(v, dict):
                out[k] = decode_value(v)
            elif isinstance(v, bool):
                out[k] = Value.boolean(v)
            elif isinstance(v, (int, float)):
                out[k] = Value.number(v)
            else:
                out[k] = Value.text(str(v))
        return out

    state = None
    if any(k in doc for k in ("flags", "status", "lastSubmissions")):
        class _State:
            study_status = doc.get("status", "active")
            flags = values(doc.get("flags"))
            last_submissions = {k: int(v) for k, v in doc.get("lastSubmissions", {}).items()}

        state = _State()
    return EvalContext(
        now=int(doc.get("now", 0)),
        participant_state=state,
        event_payload=values(doc.get("payload")),
        external_context=values(doc.get("external")),
    )


def cmd_eval(args) -> int:
    try:
        expr = parse_text(args.expression)
    except ExpressionError as e:
        print(f"parse error: {e}", file=sys.stderr)
        return 1
    try:
        ctx = _context_from_file(args.context)
    except (OSError, json.JSONDecodeError) as e:
        print(f"cannot read context: {e}", file=sys.stderr)
        return 1
    value, warnings = evaluate(expr, ctx)
    for warning in warnings:
        print(f"warning: {warning}", file=sys.stderr)
    print("undefined" if value.is_undefined else value_to_plain(value))
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="caselet")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("serve", help="run the participant + management HTTP service")

    p = sub.add_parser("run-job", help="run one scheduled job and exit")
    p.add_argument("kind", choices=["timer", "messages", "cleanup"])
    p.add_argument("--store", default=_env("CASELET_STORE", "./caselet.journal"))
    p.add_argument("--at", type=int, default=None,
                   help="virtual clock instant (default: wall clock)")

    p = sub.add_parser("simulate", help="run a scenario deterministically")
    p.add_argument("scenario")
    p.add_argument("--out", default="./report")

    p = sub.add_parser("validate", help="validate a survey/rules/template document")
    p.add_argument("file")

    p = sub.add_parser("eval", help="evaluate an expression")
    p.add_argument("expression")
    p.add_argument("--context", default=None, help="JSON context file")

    args = parser.parse_args(argv)
    handlers = {
        "serve": cmd_serve,
        "run-job": cmd_run_job,
        "simulate": cmd_simulate,
        "validate": cmd_validate,
        "eval": cmd_eval,
    }
    return handlers[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
