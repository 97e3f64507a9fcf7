import pytest

from caselet.canonical import canonical_json
from caselet.expressions import Value, parse_text
from caselet.study import (
    Assignment,
    EffectBatch,
    MessageToSchedule,
    ParticipantState,
    StudyConfigError,
    active_assignments,
    custom_event,
    effects_to_doc,
    encode_study_config,
    enter_event,
    event_from_doc,
    event_to_doc,
    load_study_config,
    process_event,
    run_timer_sweep,
    state_from_doc,
    state_to_doc,
    submit_event,
    timer_event,
)
from caselet.surveys import ResponseItem, ResponseSlot, SurveyResponse

DAY = 86400
WEEK = 7 * DAY


def expr_doc(text):
    from caselet.expressions import encode, parse_text as p

    return encode(p(text))


def config_doc(rules, study_key="flu", survey_keys=("intake", "weekly"), endpoints=None):
    return {
        "format": "caselet-rules/1",
        "studyKey": study_key,
        "surveyKeys": list(survey_keys),
        "externalEndpoints": endpoints or {},
        "rules": rules,
    }


ENTER_RULE = {
    "on": "ENTER",
    "actions": [{"type": "ADD_SURVEY", "surveyKey": "intake", "category": "prio"}],
}

INTAKE_RULE = {
    "on": {"kind": "SUBMIT", "surveyKey": "intake"},
    "actions": [
        {"type": "ADD_SURVEY", "surveyKey": "weekly", "category": "normal",
         "validFrom": expr_doc("timestampWithOffset(0)")},
        {"type": "SCHEDULE_MESSAGE", "templateKey": "reminder",
         "due": expr_doc("timestampWithOffset(604800)")},
    ],
}

REMINDER_RULE = {
    "on": "TIMER",
    "actions": [{
        "type": "IF",
        "cond": expr_doc('lt(getLastSubmissionDate("weekly"), timestampWithOffset(-604800))'),
        "then": [{"type": "SCHEDULE_MESSAGE", "templateKey": "reminder", "due": expr_doc("now()")}],
        "else": [],
    }],
}


def state(pid="p1", study="flu", **kw):
    return ParticipantState(participant_id=pid, study_key=study, **kw)


def response(survey_key, at, participant="p1"):
    return SurveyResponse(
        survey_key=survey_key, version_id="v1", participant_ref=participant,
        opened_at=at - 60, submitted_at=at,
        items=(ResponseItem("Q1", (ResponseSlot("scg", Value.text("yes")),)),),
    )


# -- process_event ------------------------------------------------------------------


def test_enter_adds_prio_assignment():
    config = load_study_config(config_doc([ENTER_RULE]))
    new_state, effects = process_event(config, state(), enter_event(1000))
    assert new_state.assigned_surveys == (Assignment("intake", "prio"),)
    assert new_state.entered_at == 1000
    assert new_state.version == 1
    assert effects.messages_to_schedule == []


def test_intake_submit_assigns_weekly_and_schedules_reminder():
    config = load_study_config(config_doc([ENTER_RULE, INTAKE_RULE]))
    s0 = state()
    s1, _ = process_event(config, s0, enter_event(1000))
    clock = 5000
    s2, effects = process_event(config, s1, submit_event(response("intake", clock), clock))
    # intake assignment consumed, weekly added with validFrom = clock
    assert [a.survey_key for a in s2.assigned_surveys] == ["weekly"]
    assert s2.assigned_surveys[0].valid_from == clock
    assert s2.last_submissions == {"intake": clock}
    assert effects.messages_to_schedule == [
        MessageToSchedule("p1", "reminder", clock + WEEK)
    ]
    assert s2.version == 2


def test_timer_reminder_fires_when_overdue():
    config = load_study_config(config_doc([REMINDER_RULE]))
    now = 100 * DAY
    overdue = state(last_submissions={"weekly": now - 8 * DAY})
    _, effects = process_event(config, overdue, timer_event(now))
    assert effects.messages_to_schedule == [MessageToSchedule("p1", "reminder", now)]

    fresh = state(last_submissions={"weekly": now - 3 * DAY})
    _, effects = process_event(config, fresh, timer_event(now))
    assert effects.messages_to_schedule == []

    never = state()  # no weekly submission at all -> condition undefined -> no reminder
    _, effects = process_event(config, never, timer_event(now))
    assert effects.messages_to_schedule == []


def test_submit_consumes_only_first_matching_assignment():
    config = load_study_config(config_doc([]))
    s0 = state(assigned_surveys=(
        Assignment("weekly", "normal", valid_from=10),
        Assignment("weekly", "normal", valid_from=20),
    ))
    s1, _ = process_event(config, s0, submit_event(response("weekly", 1000), 1000))
    assert s1.assigned_surveys == (Assignment("weekly", "normal", valid_from=20),)
    assert s1.last_submissions["weekly"] == 1000


def test_version_increments_even_without_matching_rules():
    config = load_study_config(config_doc([]))
    s1, _ = process_event(config, state(), timer_event(50))
    assert s1.version == 1
    s2, _ = process_event(config, s1, timer_event(60))
    assert s2.version == 2


def test_actions_see_earlier_action_effects():
    rules = [{
        "on": "ENTER",
        "actions": [
            {"type": "UPDATE_FLAG", "key": "cohort", "value": expr_doc('"a"')},
            {"type": "UPDATE_FLAG", "key": "cohort", "value": expr_doc('"b"')},
            {"type": "IF",
             "cond": expr_doc('eq(getStudyFlag("cohort"), "b")'),
             "then": [{"type": "UPDATE_FLAG", "key": "confirmed", "value": expr_doc("true")}],
             "else": []},
        ],
    }]
    config = load_study_config(config_doc(rules))
    s1, _ = process_event(config, state(), enter_event(0))
    assert s1.flags["cohort"] == Value.text("b")
    assert s1.flags["confirmed"] == Value.boolean(True)


def test_undefined_flag_value_clears_flag():
    rules = [{
        "on": {"kind": "CUSTOM", "eventKey": "wipe"},
        "actions": [{"type": "UPDATE_FLAG", "key": "cohort",
                     "value": expr_doc('getEventPayload("missing")')}],
    }]
    config = load_study_config(config_doc(rules))
    s0 = state(flags={"cohort": Value.text("a")})
    s1, _ = process_event(config, s0, custom_event("wipe", {}, 10))
    assert "cohort" not in s1.flags


def test_custom_event_payload_reaches_expressions():
    rules = [{
        "on": {"kind": "CUSTOM", "eventKey": "lab_result"},
        "actions": [{
            "type": "IF",
            "cond": expr_doc('eq(getEventPayload("positive"), true)'),
            "then": [{"type": "UPDATE_FLAG", "key": "lab", "value": expr_doc('"positive"')}],
            "else": [{"type": "UPDATE_FLAG", "key": "lab", "value": expr_doc('"negative"')}],
        }],
    }]
    config = load_study_config(config_doc(rules))
    s1, _ = process_event(
        config, state(), custom_event("lab_result", {"positive": Value.boolean(True)}, 5)
    )
    assert s1.flags["lab"] == Value.text("positive")


def test_notify_external_resolves_payload_and_url():
    rules = [{
        "on": "ENTER",
        "actions": [{"type": "NOTIFY_EXTERNAL", "endpointKey": "registry",
                     "payload": {"when": expr_doc("now()")}}],
    }]
    config = load_study_config(
        config_doc(rules, endpoints={"registry": "https://registry.example/hook"})
    )
    _, effects = process_event(config, state(), enter_event(42))
    notif = effects.external_notifications[0]
    assert notif.url == "https://registry.example/hook"
    assert notif.payload == {"when": Value.timestamp(42)}


def test_update_status_and_remove_all():
    rules = [{
        "on": {"kind": "CUSTOM", "eventKey": "close"},
        "actions": [
            {"type": "REMOVE_SURVEY", "surveyKey": "weekly", "selector": "all"},
            {"type": "UPDATE_STATUS", "status": "finished"},
        ],
    }]
    config = load_study_config(config_doc(rules))
    s0 = state(assigned_surveys=(
        Assignment("weekly", "normal"), Assignment("intake", "prio"), Assignment("weekly", "optional"),
    ))
    s1, _ = process_event(config, s0, custom_event("close", {}, 1))
    assert s1.assigned_surveys == (Assignment("intake", "prio"),)
    assert s1.study_status == "finished"


def test_process_event_is_pure():
    config = load_study_config(config_doc([ENTER_RULE]))
    s0 = state()
    a1 = process_event(config, s0, enter_event(1000))
    a2 = process_event(config, s0, enter_event(1000))
    assert a1[0] == a2[0]
    assert effects_to_doc(a1[1]) == effects_to_doc(a2[1])
    assert s0.version == 0  # input untouched


def test_wrong_study_rejected():
    config = load_study_config(config_doc([], study_key="other"))
    with pytest.raises(ValueError):
        process_event(config, state(study="flu"), enter_event(0))


# -- active_assignments ------------------------------------------------------------------


def test_window_filtering_and_inclusive_bounds():
    s = state(assigned_surveys=(
        Assignment("a", "normal", valid_from=1100),        # not yet valid
        Assignment("b", "normal", valid_until=1000),       # inclusive upper bound
        Assignment("c", "normal", valid_until=999),        # expired
        Assignment("d", "normal"),                          # unbounded
    ))
    active = active_assignments(s, clock=1000)
    assert [a.survey_key for a in active] == ["b", "d"]


def test_category_ordering_stable():
    s = state(assigned_surveys=(
        Assignment("n1", "normal"), Assignment("o1", "optional"),
        Assignment("p1", "prio"), Assignment("n2", "normal"),
    ))
    assert [a.survey_key for a in active_assignments(s, 0)] == ["p1", "n1", "n2", "o1"]


# -- timer sweep ---------------------------------------------------------------------------


def test_sweep_skips_inactive_participants():
    config = load_study_config(config_doc([REMINDER_RULE]))
    now = 50 * DAY
    states = [
        state("p1", last_submissions={"weekly": now - 8 * DAY}),
        state("p2", last_submissions={"weekly": now - 2 * DAY}),
        state("p3", last_submissions={"weekly": now - 9 * DAY}),
        state("p4", study_status="finished", last_submissions={"weekly": now - 30 * DAY}),
    ]
    results = list(run_timer_sweep(config, states, now))
    assert [r.participant_id for r in results] == ["p1", "p2", "p3"]
    reminded = [r.participant_id for r in results if r.effects.messages_to_schedule]
    assert reminded == ["p1", "p3"]
    assert all(r.state.version == 1 for r in results)


def test_sweep_over_empty_study():
    config = load_study_config(config_doc([]))
    assert list(run_timer_sweep(config, [], 0)) == []


def test_sweep_reminder_counts():
    config = load_study_config(config_doc([REMINDER_RULE]))
    now = 100 * DAY
    states = []
    for i in range(10):
        age = (4 + i) * DAY  # ages 4..13 days -> overdue when age > 7
        states.append(state(f"p{i}", last_submissions={"weekly": now - age}))
    results = list(run_timer_sweep(config, states, now))
    scheduled = sum(len(r.effects.messages_to_schedule) for r in results)
    assert scheduled == 6  # ages 8..13 only


# -- replay determinism ----------------------------------------------------------------------


def test_event_log_replay_is_identical():
    config = load_study_config(config_doc([ENTER_RULE, INTAKE_RULE, REMINDER_RULE]))
    events = [
        enter_event(0),
        submit_event(response("intake", DAY), DAY),
        timer_event(DAY + 6 * 3600),
        submit_event(response("weekly", 2 * DAY), 2 * DAY),
        timer_event(12 * DAY),
    ]

    def replay():
        s = state()
        log = []
        for e in events:
            s, effects = process_event(config, s, e)
            log.append(canonical_json(effects_to_doc(effects)))
        return canonical_json(state_to_doc(s)), "\n".join(log)

    assert replay() == replay()


# -- documents ---------------------------------------------------------------------------------


def test_config_document_round_trip():
    config = load_study_config(config_doc(
        [ENTER_RULE, INTAKE_RULE, REMINDER_RULE],
        endpoints={"registry": "https://x.example"},
    ))
    assert load_study_config(encode_study_config(config)) == config


def test_state_document_round_trip():
    s = state(
        flags={"cohort": Value.text("b"), "n": Value.number(3)},
        assigned_surveys=(Assignment("weekly", "normal", 10, 20),),
        last_submissions={"intake": 5},
        entered_at=1,
        version=7,
    )
    assert state_from_doc(state_to_doc(s)) == s


def test_event_document_round_trip():
    events = [
        enter_event(1),
        submit_event(response("intake", 100), 100),
        timer_event(2),
        custom_event("lab", {"positive": Value.boolean(True)}, 3),
    ]
    for e in events:
        assert event_from_doc(event_to_doc(e)) == e


def test_config_validation_errors():
    with pytest.raises(StudyConfigError):
        load_study_config({"format": "nope"})
    with pytest.raises(StudyConfigError):  # ADD_SURVEY target not in surveyKeys
        load_study_config(config_doc([{
            "on": "ENTER",
            "actions": [{"type": "ADD_SURVEY", "surveyKey": "ghost", "category": "prio"}],
        }]))
    with pytest.raises(StudyConfigError):  # empty action list
        load_study_config(config_doc([{"on": "ENTER", "actions": []}]))
    with pytest.raises(StudyConfigError):  # unknown endpoint
        load_study_config(config_doc([{
            "on": "ENTER",
            "actions": [{"type": "NOTIFY_EXTERNAL", "endpointKey": "ghost"}],
        }]))
    with pytest.raises(StudyConfigError):  # invalid expression
        load_study_config(config_doc([{
            "on": "ENTER",
            "actions": [{"type": "UPDATE_FLAG", "key": "x",
                         "value": {"name": "bogus", "args": []}}],
        }]))
