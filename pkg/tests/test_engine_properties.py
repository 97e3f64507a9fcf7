"""Randomized gating properties over generated surveys.

The generator only emits conditions that reference EARLIER questions
(eq(getResponseValue(ref,"scg"),"yes")), which makes an independent
visibility oracle trivial: an item is visible iff its ancestors are, its
referenced item is visible, and that item's buffered answer is "yes".
The oracle below shares no code with the engine's single-pass walk.
"""

from __future__ import annotations

import random

from caselet.engine import (
    AtBoundaryError,
    NavigationBlockedError,
    apply_answer,
    finalize,
    navigate,
    snapshot,
    start_session,
)
from caselet.expressions import EvalContext, Value
from caselet.surveys import load_survey


def e_eq_yes(ref):
    return {"name": "eq", "args": [
        {"name": "getResponseValue", "args": [{"str": ref}, {"str": "scg"}]},
        {"str": "yes"}]}


def e_required(key, slot):
    return {"name": "hasResponse", "args": [{"str": key}, {"str": slot}]}


def gen_survey(rng: random.Random) -> tuple[dict, dict]:
    """Returns (survey document, meta) where meta maps questions to their
    slot kind, slot key, condition reference, and parent group."""
    items = []
    meta: dict[str, dict] = {}
    question_keys: list[str] = []
    counter = 0

    def make_question():
        nonlocal counter
        counter += 1
        key = f"Q{counter}"
        kind = "singleChoice" if rng.random() < 0.7 else "numberInput"
        slot_key = "scg" if kind == "singleChoice" else "num"
        slot = {"slotKey": slot_key, "kind": kind}
        if kind == "singleChoice":
            slot["options"] = [{"key": "yes", "label": "Yes"}, {"key": "no", "label": "No"}]
        else:
            slot["min"] = 0
            slot["max"] = 10
        doc = {
            "itemKey": key, "kind": "question",
            "components": [
                {"role": "title", "text": f"Question {key}"},
                {"role": "responseGroup", "response": slot},
            ],
        }
        info = {"slot": slot_key, "kind": kind, "ref": None, "required": False, "group": None}
        if question_keys and rng.random() < 0.4:
            ref = rng.choice(question_keys)
            doc["condition"] = e_eq_yes(ref)
            info["ref"] = ref
        if rng.random() < 0.35:
            doc["validations"] = [{
                "key": "required", "severity": "hard",
                "rule": e_required(key, slot_key), "message": "Required",
            }]
            info["required"] = True
        question_keys.append(key)
        meta[key] = info
        return doc

    n_blocks = rng.randint(4, 8)
    for b in range(n_blocks):
        roll = rng.random()
        if roll < 0.15 and b > 0:
            items.append({"itemKey": f"pb{b}", "kind": "pageBreak"})
        elif roll < 0.30:
            group_key = f"g{b}"
            group = {"itemKey": group_key, "kind": "group", "children": []}
            if question_keys and rng.random() < 0.5:
                ref = rng.choice(question_keys)
                group["condition"] = e_eq_yes(ref)
                group_ref = ref
            else:
                group_ref = None
            for _ in range(rng.randint(1, 3)):
                q = make_question()
                meta[q["itemKey"]]["group"] = (group_key, group_ref)
                group["children"].append(q)
            items.append(group)
        else:
            items.append(make_question())

    if not question_keys:
        items.append(make_question())
    doc = {"format": "caselet-survey/1", "surveyKey": "gen", "versionId": "v1",
           "items": items}
    return doc, meta


def oracle_visible(meta: dict, answers: dict) -> set[str]:
    """Independent visibility: backward-only references resolve in one
    forward pass; a reference to a hidden or non-'yes' item hides."""
    visible: set[str] = set()
    for key in sorted(meta, key=lambda k: int(k[1:])):  # Q1, Q2, ... in order
        info = meta[key]
        ok = True
        if info["group"] is not None:
            _, group_ref = info["group"]
            if group_ref is not None:
                ok = ok and group_ref in visible and answers.get(group_ref) == "yes"
        if info["ref"] is not None:
            ok = ok and info["ref"] in visible and answers.get(info["ref"]) == "yes"
        if ok:
            visible.add(key)
    return visible


def run_one(seed: int) -> None:
    rng = random.Random(seed)
    doc, meta = gen_survey(rng)
    definition = load_survey(doc)
    session, snap = start_session(definition, EvalContext(now=1000), seed=seed, clock=1000)
    answers: dict[str, object] = {}  # our own buffer mirror (raw python values)

    def give_answer(key, value):
        info = meta[key]
        if info["kind"] == "singleChoice":
            apply_answer(session, key, info["slot"], Value.text(value))
        else:
            apply_answer(session, key, info["slot"], Value.number(value))
        answers[key] = value

    for _ in range(rng.randint(5, 25)):
        roll = rng.random()
        snap = snapshot(session)
        if roll < 0.6 and meta:
            key = rng.choice(sorted(meta))
            if meta[key]["kind"] == "singleChoice":
                give_answer(key, rng.choice(["yes", "no", "yes"]))
            else:
                give_answer(key, rng.choice([-3, 2, 5, 12]))
        elif roll < 0.8:
            # Gating: next succeeds iff not last page and no visible hard failure
            failing = [i for i in snap.items if i.failing_hard()]
            last = snap.page_index == snap.page_count - 1
            try:
                navigate(session, "next")
                succeeded, blocked, boundary = True, False, False
            except NavigationBlockedError:
                succeeded, blocked, boundary = False, True, False
            except AtBoundaryError:
                succeeded, blocked, boundary = False, False, True
            if last:
                assert not succeeded and boundary
            elif failing:
                assert blocked, f"seed {seed}: expected NavigationBlocked"
                assert snap.can_go_next is False
            else:
                assert succeeded, f"seed {seed}: expected next to succeed"
                assert snap.can_go_next is True
        else:
            try:
                navigate(session, "prev")
                assert snap.page_index > 0
            except AtBoundaryError:
                assert snap.page_index == 0

    # Drive to a submittable state: answer every visible question validly.
    for _ in range(200):
        visible = oracle_visible(meta, answers)
        progressed = False
        for key in sorted(visible, key=lambda k: int(k[1:])):
            info = meta[key]
            current = answers.get(key)
            if info["kind"] == "numberInput" and isinstance(current, int) and not 0 <= current <= 10:
                give_answer(key, 5)
                progressed = True
            elif info["required"] and current in (None, ""):
                give_answer(key, "yes" if info["kind"] == "singleChoice" else 5)
                progressed = True
        if not progressed:
            break

    response = finalize(session, clock=2000)

    # Exclusion invariant, checked against the independent oracle.
    visible = oracle_visible(meta, answers)
    response_keys = {item.item_key for item in response.items}
    answered_visible = {
        k for k in visible
        if answers.get(k) not in (None, "")
    }
    assert response_keys == answered_visible, (
        f"seed {seed}: response {sorted(response_keys)} != "
        f"oracle {sorted(answered_visible)}"
    )
    hidden_answered = {k for k in answers if k not in visible}
    assert not (response_keys & hidden_answered)


def test_gating_and_exclusion_over_random_sessions():
    for seed in range(60):
        run_one(seed)
