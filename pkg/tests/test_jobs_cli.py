import json

import pytest

from caselet.cli import main as cli_main
from caselet.messaging import CollectingSink
from caselet.store import ACCOUNTS, MESSAGES, account_to_doc
from caselet.store.accounts import Account, Profile

from apifixtures import auth, make_platform, rules_doc, seeded_client, signup_and_enter
from scenario_weekly import build_scenario

DAY = 86400


# -- jobs --------------------------------------------------------------------------


def test_timer_job_over_empty_study():
    platform, clock, _ = make_platform()
    platform.register_study(rules_doc())
    report = platform.run_job("timer")
    assert report.ran is True
    assert report.details == {"participants": 0, "messagesScheduled": 0}


def test_job_lease_blocks_second_runner():
    platform, clock, _ = make_platform()
    platform.register_study(rules_doc())
    assert platform.store.acquire_lease("job:cleanup", "someone-else", 300, clock.now())
    report = platform.run_job("cleanup")
    assert report.ran is False
    assert report.details == {"reason": "already running"}
    # after the other holder's lease expires the job runs again
    clock.advance(301)
    assert platform.run_job("cleanup").ran is True


def test_messages_job_reports_sent_counts():
    client, platform, clock, sink = seeded_client()
    for email in ("a@example.com", "b@example.com", "c@example.com"):
        signup_and_enter(client, clock, email=email)
    report = platform.run_job("messages")
    assert report.ran and report.details["sent"] == 3  # three verification codes


def test_cleanup_job_uses_configured_ttl():
    platform, clock, _ = make_platform()
    platform.cleanup_ttl_seconds = 7 * DAY
    account = Account(
        account_id="acc-1", email="old@example.com", password_hash="scrypt$4$4$1$00$00",
        verified=False, created_at=clock.now(), profiles=(Profile("prf-1", "main"),),
    )
    platform.store.put(ACCOUNTS, "acc-1", account_to_doc(account))
    clock.advance(8 * DAY)
    report = platform.run_job("cleanup")
    assert report.details == {"removed": 1}


def test_timer_job_runs_rules_across_studies():
    client, platform, clock, sink = seeded_client()
    token, entered = signup_and_enter(client, clock)
    report = platform.run_job("timer")
    assert report.details["participants"] == 1
    state = platform.load_state("flu", entered["participantId"])
    assert state.version == 2  # ENTER + TIMER


def test_timer_job_idempotent_at_fixed_clock():
    # An overdue participant gets exactly one pending reminder even when the
    # timer job runs twice at the same virtual instant: identical pending
    # messages (participant, template, due) are never queued twice.
    from caselet.store import STATES
    from caselet.study import state_from_doc, state_to_doc
    from dataclasses import replace

    client, platform, clock, sink = seeded_client()
    reminder = {
        "on": "TIMER",
        "actions": [{
            "type": "IF",
            "cond": {"name": "lt", "args": [
                {"name": "getLastSubmissionDate", "args": [{"str": "weekly"}]},
                {"name": "timestampWithOffset", "args": [{"num": -604800}]}]},
            "then": [{"type": "SCHEDULE_MESSAGE", "templateKey": "reminder",
                      "due": {"name": "now", "args": []}}],
            "else": [],
        }],
    }
    doc = rules_doc()
    doc["rules"].append(reminder)
    platform.register_study(doc)
    platform.upload_template("flu", {
        "format": "caselet-template/1", "templateKey": "reminder",
        "messageType": "reminder", "subject": "s", "body": "b"})
    _, entered = signup_and_enter(client, clock)
    pid = entered["participantId"]
    # make the participant overdue by 8 days
    key = f"flu/{pid}"
    state = state_from_doc(platform.store.get(STATES, key))
    state = replace(state, last_submissions={"weekly": clock.now() - 8 * DAY})
    platform.store.put(STATES, key, state_to_doc(state))

    first = platform.run_job("timer")
    second = platform.run_job("timer")
    assert first.details["messagesScheduled"] == 1
    pending = [d for _, d in platform.store.items(MESSAGES)
               if d["status"] == "pending" and d["templateKey"] == "reminder"]
    assert len(pending) == 1, "second run at the same instant queued a duplicate"


# -- cli ----------------------------------------------------------------------------


def test_cli_validate_survey_ok(tmp_path, capsys):
    from apifixtures import intake_survey_doc

    path = tmp_path / "survey.json"
    path.write_text(json.dumps(intake_survey_doc()))
    assert cli_main(["validate", str(path)]) == 0
    assert "ok" in capsys.readouterr().out


def test_cli_validate_rules_and_rejects_bad(tmp_path, capsys):
    good = tmp_path / "rules.json"
    good.write_text(json.dumps(rules_doc()))
    assert cli_main(["validate", str(good)]) == 0

    bad_doc = rules_doc()
    bad_doc["rules"][0]["actions"][0]["surveyKey"] = "ghost"
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(bad_doc))
    assert cli_main(["validate", str(bad)]) == 1
    assert "invalid" in capsys.readouterr().err


def test_cli_validate_unknown_format(tmp_path, capsys):
    path = tmp_path / "x.json"
    path.write_text('{"format": "mystery/1"}')
    assert cli_main(["validate", str(path)]) == 1


def test_cli_eval_arithmetic(capsys):
    assert cli_main(["eval", "sum(1,2)"]) == 0
    assert capsys.readouterr().out.strip() == "3"


def test_cli_eval_with_context(tmp_path, capsys):
    ctx = tmp_path / "ctx.json"
    ctx.write_text(json.dumps({
        "now": 1000, "status": "active",
        "flags": {"name": "Ada"},
        "lastSubmissions": {"weekly": 400},
    }))
    assert cli_main(["eval", 'getStudyFlag("name")', "--context", str(ctx)]) == 0
    assert capsys.readouterr().out.strip() == "Ada"
    assert cli_main(["eval", 'lt(getLastSubmissionDate("weekly"), now())',
                     "--context", str(ctx)]) == 0
    assert capsys.readouterr().out.strip() == "true"


def test_cli_eval_warnings_go_to_stderr(capsys):
    assert cli_main(["eval", 'getStudyFlag("x")']) == 0
    captured = capsys.readouterr()
    assert captured.out.strip() == "undefined"
    assert "warning:" in captured.err


def test_cli_eval_parse_error(capsys):
    assert cli_main(["eval", "lt(2,"]) == 1
    assert "parse error" in capsys.readouterr().err


def test_cli_simulate_writes_report(tmp_path, capsys):
    scenario_path = tmp_path / "weekly.scenario.json"
    doc = build_scenario()
    # trim to 2 weeks to keep the CLI test snappy
    doc["durationSeconds"] = 14 * DAY
    doc["timeline"] = [t for t in doc["timeline"] if t["at"] <= doc["startAt"] + 14 * DAY]
    scenario_path.write_text(json.dumps(doc))
    out_dir = tmp_path / "report"
    assert cli_main(["simulate", str(scenario_path), "--out", str(out_dir)]) == 0
    assert sorted(p.name for p in out_dir.iterdir()) == [
        "export.csv", "outbox.ndjson", "report.json", "states.ndjson",
    ]
    # golden-style: a second run produces byte-identical files
    out2 = tmp_path / "report2"
    assert cli_main(["simulate", str(scenario_path), "--out", str(out2)]) == 0
    for name in ("states.ndjson", "outbox.ndjson", "export.csv", "report.json"):
        assert (out_dir / name).read_bytes() == (out2 / name).read_bytes()


def test_cli_simulate_rejects_bad_scenario(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text('{"format": "caselet-scenario/1"}')
    assert cli_main(["simulate", str(path), "--out", str(tmp_path / "r")]) == 1
    assert "scenario error" in capsys.readouterr().err


def test_cli_run_job_on_file_store(tmp_path, capsys):
    store_path = tmp_path / "store.journal"
    assert cli_main(["run-job", "cleanup", "--store", str(store_path), "--at", "1000"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["kind"] == "cleanup"
    assert out["ran"] is True
