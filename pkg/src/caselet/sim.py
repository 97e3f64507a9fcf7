"""Deterministic longitudinal simulator.

A scenario document (``caselet-scenario/1``) bundles a study config, its
surveys and templates, a participant roster, and a timeline of actions.
simulate() drives the real platform — store, study engine, survey
sessions, message dispatch — on a virtual clock and produces a report
whose serialization is byte-stable for a given scenario: states.ndjson
(every persisted state change), outbox.ndjson (messages actually sent),
export.csv (final response export), and report.json (per-sweep activity).
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from pathlib import Path

from .canonical import canonical_json, ndjson_line
from .clock import ManualClock
from .expressions import Value
from .messaging import CollectingSink, RateLimitConfig, outbox_record_to_doc
from .service import Platform, ServiceError
from .store import (
    ACCOUNTS,
    FAST_SCRYPT,
    MemoryStore,
    PROFILE_INDEX,
    account_to_doc,
)
from .store.accounts import Account, Profile
from .store.export import export_responses
from .study import active_assignments, state_to_doc, timer_event
from .surveys import SurveyDocumentError

FORMAT_SCENARIO = "caselet-scenario/1"

DEFAULT_SWEEP_SECONDS = 6 * 3600  # timer cadence when the scenario is silent


class ScenarioInvalidError(Exception):
    pass


@dataclass(frozen=True)
class TimelineItem:
    at: int
    order: int
    participant: str | None
    action: dict


@dataclass(frozen=True)
class Scenario:
    seed: int
    start_at: int
    duration_seconds: int
    clock_step_seconds: int
    sweep_every_seconds: int
    study_config_doc: dict
    survey_docs: tuple[dict, ...]
    template_docs: tuple[dict, ...]
    participants: tuple[dict, ...]  # {"profile", "enterAt", "email"?}
    timeline: tuple[TimelineItem, ...]
    rate_limit: RateLimitConfig

    @property
    def study_key(self) -> str:
        return self.study_config_doc["studyKey"]


def load_scenario(doc) -> Scenario:
    if not isinstance(doc, dict) or doc.get("format") != FORMAT_SCENARIO:
        raise ScenarioInvalidError(f"format must be '{FORMAT_SCENARIO}'")
    try:
        start_at = int(doc["startAt"])
        duration = int(doc["durationSeconds"])
        step = int(doc.get("clockStepSeconds", 3600))
        sweep = int(doc.get("sweepEverySeconds", DEFAULT_SWEEP_SECONDS))
        seed = int(doc.get("seed", 0))
        config = doc["studyConfig"]
        participants = tuple(doc.get("participants", []))
        raw_timeline = doc.get("timeline", [])
    except (KeyError, TypeError, ValueError) as e:
        raise ScenarioInvalidError(f"bad scenario: {e}") from None
    if step <= 0 or sweep <= 0 or duration < 0:
        raise ScenarioInvalidError("step, sweep, and duration must be positive")
    for p in participants:
        if "profile" not in p or "enterAt" not in p:
            raise ScenarioInvalidError("participants need profile and enterAt")

    timeline = []
    last_at = None
    for i, item in enumerate(raw_timeline):
        at = int(item["at"])
        if last_at is not None and at < last_at:
            raise ScenarioInvalidError("timeline must be sorted by 'at'")
        last_at = at
        timeline.append(TimelineItem(at, i, item.get("participant"), item["action"]))

    limits = doc.get("rateLimit", {})
    rate_limit = RateLimitConfig(
        max_per_window=int(limits.get("maxPerWindow", 1000)),
        window_seconds=int(limits.get("windowSeconds", 60)),
        batch_size=int(limits.get("batchSize", 1000)),
        max_attempts=int(limits.get("maxAttempts", 3)),
        backoff_base_seconds=int(limits.get("backoffBaseSeconds", 300)),
    )
    return Scenario(
        seed=seed,
        start_at=start_at,
        duration_seconds=duration,
        clock_step_seconds=step,
        sweep_every_seconds=sweep,
        study_config_doc=config,
        survey_docs=tuple(doc.get("surveys", [])),
        template_docs=tuple(doc.get("templates", [])),
        participants=participants,
        timeline=tuple(timeline),
        rate_limit=rate_limit,
    )


@dataclass
class SweepRecord:
    at: int
    active: dict[str, list[str]]  # pid -> active assignment survey keys (with repeats)
    reminders: dict[str, int]  # pid -> messages scheduled by this sweep

    def to_doc(self) -> dict:
        return {
            "at": self.at,
            "active": {k: self.active[k] for k in sorted(self.active)},
            "reminders": {k: self.reminders[k] for k in sorted(self.reminders)},
        }


@dataclass
class SimulationReport:
    scenario_seed: int
    study_key: str
    state_lines: list[dict] = field(default_factory=list)
    sweeps: list[SweepRecord] = field(default_factory=list)
    outbox: list[dict] = field(default_factory=list)
    export_csv: bytes = b""
    dispatch_totals: dict = field(default_factory=lambda: {"sent": 0, "deferred": 0, "failed": 0})

    def report_doc(self) -> dict:
        return {
            "format": "caselet-report/1",
            "seed": self.scenario_seed,
            "studyKey": self.study_key,
            "sweeps": [s.to_doc() for s in self.sweeps],
            "dispatch": {k: self.dispatch_totals[k] for k in sorted(self.dispatch_totals)},
            "states": len(self.state_lines),
            "outboxCount": len(self.outbox),
        }

    def states_ndjson(self) -> str:
        return "".join(ndjson_line(d) for d in self.state_lines)

    def outbox_ndjson(self) -> str:
        return "".join(ndjson_line(d) for d in self.outbox)

    def write(self, out_dir) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "states.ndjson").write_text(self.states_ndjson(), encoding="utf-8")
        (out / "outbox.ndjson").write_text(self.outbox_ndjson(), encoding="utf-8")
        (out / "export.csv").write_bytes(self.export_csv)
        (out / "report.json").write_text(
            canonical_json(self.report_doc()) + "\n", encoding="utf-8"
        )


class _Sim:
    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        self.clock = ManualClock(scenario.start_at)
        self.sink = CollectingSink()
        self.platform = Platform(
            store=MemoryStore(),
            clock=self.clock,
            token_secret="simulation",
            rng=random.Random(scenario.seed),
            scrypt_params=FAST_SCRYPT,
            rate_limit=scenario.rate_limit,
            sink=self.sink,
        )
        self.report = SimulationReport(scenario.seed, scenario.study_key)
        self.accounts: dict[str, Account] = {}  # profile -> account

    # -- setup ---------------------------------------------------------------

    def seed_world(self) -> None:
        s = self.scenario
        try:
            self.platform.register_study(s.study_config_doc)
            for doc in s.survey_docs:
                self.platform.upload_survey(s.study_key, doc)
            for doc in s.template_docs:
                self.platform.upload_template(s.study_key, doc)
        except (ServiceError, SurveyDocumentError) as e:
            raise ScenarioInvalidError(str(e)) from None
        for p in s.participants:
            profile_name = p["profile"]
            email = p.get("email", f"{profile_name}@sim.invalid")
            account = Account(
                account_id=f"acc-{profile_name}",
                email=email,
                password_hash="scrypt$4$4$1$00$00",  # never logged into
                verified=True,
                created_at=s.start_at,
                profiles=(Profile(profile_name, "main"),),
            )
            self.platform.store.put(ACCOUNTS, account.account_id, account_to_doc(account))
            self.platform.store.put(PROFILE_INDEX, profile_name, {"accountId": account.account_id})
            self.accounts[profile_name] = account

    # -- recording ---------------------------------------------------------------

    def record_state(self, pid: str) -> None:
        state = self.platform.load_state(self.scenario.study_key, pid)
        if state is not None:
            self.report.state_lines.append(
                {"at": self.clock.now(), "participantId": pid, "state": state_to_doc(state)}
            )

    # -- actions -------------------------------------------------------------------

    def enter(self, profile: str) -> None:
        account = self.accounts[profile]
        config = self.platform.study_config(self.scenario.study_key)
        try:
            self.platform.enter_study(account, profile, self.scenario.study_key,
                                      config.consent_version)
        except ServiceError as e:
            raise ScenarioInvalidError(f"enter {profile}: {e.detail}") from None
        self.record_state(profile)

    def answer_and_submit(self, profile: str, action: dict) -> None:
        account = self.accounts[profile]
        survey_key = action["surveyKey"]
        try:
            session_id, snap = self.platform.open_session(
                account, profile, self.scenario.study_key, survey_key
            )
            for a in action.get("answers", []):
                snap = self.platform.answer_json(
                    account.account_id, session_id, a["itemKey"], a["slotKey"], a["value"]
                )
            while snap.can_go_next:
                snap = self.platform.move(account.account_id, session_id, "next")
            if not snap.can_submit:
                raise ScenarioInvalidError(
                    f"{profile}/{survey_key}: cannot submit (failing validations)"
                )
            self.platform.submit_session(account.account_id, session_id)
        except ServiceError as e:
            raise ScenarioInvalidError(f"submit {profile}/{survey_key}: {e.detail}") from None
        self.record_state(profile)

    def custom(self, item: TimelineItem) -> None:
        action = item.action
        payload = {}
        for key, raw in sorted(action.get("payload", {}).items()):
            if isinstance(raw, bool):
                payload[key] = Value.boolean(raw)
            elif isinstance(raw, (int, float)):
                payload[key] = Value.number(raw)
            else:
                payload[key] = Value.text(str(raw))
        targets = [item.participant] if item.participant else None
        self.platform.trigger_custom_event(
            self.scenario.study_key, action["eventKey"], payload, targets
        )
        for pid in targets or list(self.accounts):
            self.record_state(pid)

    def sweep(self) -> None:
        now = self.clock.now()
        study = self.scenario.study_key
        record = SweepRecord(at=now, active={}, reminders={})
        for profile in sorted(self.accounts):
            state = self.platform.load_state(study, profile)
            if state is None or state.study_status != "active":
                continue
            _, effects = self.platform.apply_event(study, profile, timer_event(now))
            if effects.messages_to_schedule:
                record.reminders[profile] = len(effects.messages_to_schedule)
            self.record_state(profile)
        for profile in sorted(self.accounts):
            state = self.platform.load_state(study, profile)
            if state is not None:
                record.active[profile] = [
                    a.survey_key for a in active_assignments(state, now)
                ]
        self.report.sweeps.append(record)

    def dispatch(self) -> None:
        report = self.platform.run_job("messages")
        if report.ran:
            for key in ("sent", "deferred", "failed"):
                self.report.dispatch_totals[key] += report.details[key]

    # -- main loop --------------------------------------------------------------------

    def run(self) -> SimulationReport:
        s = self.scenario
        self.seed_world()

        events: list[tuple[int, int, str, object]] = []
        order = 0
        for p in s.participants:
            events.append((int(p["enterAt"]), order, "enter", p["profile"]))
            order += 1
        for item in s.timeline:
            events.append((item.at, order + item.order, "timeline", item))
        events.sort(key=lambda t: (t[0], t[1]))

        end = s.start_at + s.duration_seconds
        instants = {s.start_at + k * s.clock_step_seconds
                    for k in range(s.duration_seconds // s.clock_step_seconds + 1)}
        instants.update(at for at, *_ in events if at <= end)
        sweep_times = {s.start_at + k * s.sweep_every_seconds
                       for k in range(s.duration_seconds // s.sweep_every_seconds + 1)}
        instants.update(t for t in sweep_times if t <= end)

        queue = list(events)
        for now in sorted(instants):
            self.clock.set(now)
            while queue and queue[0][0] <= now:
                _, _, kind, payload = queue.pop(0)
                if kind == "enter":
                    self.enter(payload)
                else:
                    item = payload
                    action_type = item.action.get("type")
                    if action_type == "answer-and-submit":
                        self.answer_and_submit(item.participant, item.action)
                    elif action_type == "custom-event":
                        self.custom(item)
                    elif action_type == "advance-only":
                        pass
                    else:
                        raise ScenarioInvalidError(f"unknown action '{action_type}'")
            if now in sweep_times:
                self.sweep()
            self.dispatch()

        self.report.outbox = [outbox_record_to_doc(r) for r in self.sink.records]
        self.report.export_csv = export_responses(
            self.platform.store, s.study_key, 0, end + 1, fmt="csv"
        )
        return self.report


def simulate(scenario: Scenario) -> SimulationReport:
    return _Sim(scenario).run()
