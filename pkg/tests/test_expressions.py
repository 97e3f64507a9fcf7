import math

import pytest

from caselet.expressions import (
    CATALOG,
    EMPTY_CONTEXT,
    FALSE,
    TRUE,
    UNDEFINED,
    ArityMismatchError,
    Call,
    DepthExceededError,
    EvalContext,
    ExpressionSyntaxError,
    Lit,
    MalformedDocumentError,
    UnknownFunctionError,
    Value,
    ValueKind,
    call,
    decode,
    depth_of,
    encode,
    evaluate,
    lit,
    parse_text,
    print_text,
    validate,
)

from fakes import DictResponse, FakeState


def ev(source, **ctx_kwargs):
    ctx = EvalContext(now=ctx_kwargs.pop("now", 0), **ctx_kwargs)
    return evaluate(parse_text(source), ctx)


# -- values --------------------------------------------------------------------


def test_number_must_be_finite():
    with pytest.raises(ValueError):
        Value.number(float("inf"))
    with pytest.raises(ValueError):
        Value.number(float("nan"))


def test_timestamp_payload_is_integer():
    assert Value.timestamp(12.0).payload == 12
    assert isinstance(Value.timestamp(12.0).payload, int)


def test_literals_reject_timestamp_and_undefined():
    with pytest.raises(ValueError):
        Lit(Value.timestamp(0))
    with pytest.raises(ValueError):
        Lit(UNDEFINED)


# -- parsing -------------------------------------------------------------------


def test_parse_simple_call():
    assert parse_text("and(true, false)") == call("and", lit(True), lit(False))


def test_parse_nested_call_with_strings():
    expr = parse_text('eq(getResponseValue("Q1","scg"), "yes")')
    assert expr == call(
        "eq", call("getResponseValue", lit("Q1"), lit("scg")), lit("yes")
    )


def test_parse_is_whitespace_insensitive():
    a = parse_text('eq( getResponseValue( "Q1" , "scg" ) ,"yes" )')
    b = parse_text('eq(getResponseValue("Q1","scg"),"yes")')
    assert a == b


def test_parse_truncated_input_reports_position():
    with pytest.raises(ExpressionSyntaxError) as exc:
        parse_text("lt(2,")
    assert exc.value.position == 5
    assert "expression" in exc.value.expected


def test_parse_trailing_garbage_rejected():
    with pytest.raises(ExpressionSyntaxError):
        parse_text("not(true) x")


def test_parse_bare_identifier_rejected():
    with pytest.raises(ExpressionSyntaxError):
        parse_text("now")


def test_parse_unknown_function():
    with pytest.raises(UnknownFunctionError):
        parse_text("bogus(1)")


def test_parse_arity_mismatch():
    with pytest.raises(ArityMismatchError):
        parse_text("not(true, false)")


def test_parse_number_forms():
    for src, expected in [
        ("0", 0.0),
        ("-3", -3.0),
        ("2.5", 2.5),
        ("1e3", 1000.0),
        ("-1.5E-2", -0.015),
    ]:
        node = parse_text(src)
        assert isinstance(node, Lit)
        assert node.value.payload == expected


def test_parse_number_overflow_rejected():
    with pytest.raises(ExpressionSyntaxError):
        parse_text("1e999")


def test_parse_string_escapes():
    node = parse_text('"a\\"b\\\\c\\nd"')
    assert node == lit('a"b\\c\nd')


def test_parse_bad_escape_rejected():
    with pytest.raises(ExpressionSyntaxError):
        parse_text('"a\\tb"')


def test_parse_depth_limit():
    deep = "not(" * 31 + "true" + ")" * 31  # depth 32: allowed
    parse_text(deep)
    too_deep = "not(" * 32 + "true" + ")" * 32  # depth 33
    with pytest.raises(DepthExceededError):
        parse_text(too_deep)


# -- printing ------------------------------------------------------------------


def test_print_canonical_forms():
    assert print_text(call("not", lit(False))) == "not(false)"
    assert print_text(call("sum", lit(1), lit(2.5))) == "sum(1, 2.5)"


def test_print_quotes_and_escapes():
    assert print_text(lit('say "hi"\n')) == '"say \\"hi\\"\\n"'


def test_print_minimal_numbers():
    assert print_text(lit(3.0)) == "3"
    assert print_text(lit(-0.25)) == "-0.25"
    assert print_text(lit(1e300)) == "1e+300"
    assert parse_text(print_text(lit(1e300))) == lit(1e300)


# -- document codec --------------------------------------------------------------


def test_encode_literal_and_call():
    assert encode(lit(3)) == {"num": 3}
    assert encode(call("not", lit(True))) == {"name": "not", "args": [{"bool": True}]}


def test_decode_unknown_function():
    with pytest.raises(UnknownFunctionError) as exc:
        decode({"name": "bogus", "args": []})
    assert exc.value.name == "bogus"


def test_decode_malformed_documents():
    for doc in [[], "x", {}, {"num": "3"}, {"bool": 1}, {"str": 5}, {"name": 7}]:
        with pytest.raises(MalformedDocumentError):
            decode(doc)


def test_decode_arity_and_depth():
    with pytest.raises(ArityMismatchError):
        decode({"name": "not", "args": [{"bool": True}, {"bool": False}]})
    doc = {"bool": True}
    for _ in range(33):
        doc = {"name": "not", "args": [doc]}
    with pytest.raises(DepthExceededError):
        decode(doc)


# -- validation ------------------------------------------------------------------


def test_validate_accepts_valid_tree():
    assert validate(parse_text("not(true)")) == []


def test_validate_reports_arity_at_root():
    issues = validate(Call("not", (lit(True), lit(False))))
    assert len(issues) == 1
    assert issues[0].kind == "ArityMismatch"
    assert issues[0].path == ""


def test_validate_reports_depth():
    node = lit(True)
    for _ in range(33):
        node = call("not", node)
    issues = validate(node)
    assert any(i.kind == "DepthExceeded" for i in issues)


def test_validate_paths_point_into_tree():
    bad = call("and", lit(True), Call("bogus", ()))
    issues = validate(bad)
    assert issues == [
        type(issues[0])("UnknownFunction", "args[1]", "'bogus' is not in the catalog")
    ]


def test_depth_of_counts_levels():
    assert depth_of(lit(1)) == 1
    assert depth_of(call("now")) == 1
    assert depth_of(call("not", lit(True))) == 2


# -- evaluation: logic ------------------------------------------------------------


def test_boolean_identities():
    value, warnings = ev("and(true, not(false))")
    assert value == TRUE
    assert warnings == []


def test_or_and_variadic():
    assert ev("or(false, false, true)")[0] == TRUE
    assert ev("and(true, true, false)")[0] == FALSE


def test_short_circuit_suppresses_warnings():
    # Second operand would warn (no participant state); and() must not reach it.
    value, warnings = ev('and(false, hasStudyStatus("active"))')
    assert value == FALSE
    assert warnings == []
    value, warnings = ev('or(true, hasStudyStatus("active"))')
    assert value == TRUE
    assert warnings == []


def test_undefined_coerces_to_false_in_boolean_position():
    value, warnings = ev('not(getContext("missing"))')
    assert value == TRUE
    assert len(warnings) == 1  # only the missing-reference warning


def test_non_boolean_condition_warns():
    value, warnings = ev("and(1)")
    assert value == FALSE
    assert any("expected boolean" in w for w in warnings)


# -- evaluation: comparisons -------------------------------------------------------


def test_numeric_and_text_comparisons():
    assert ev("lt(1, 2)")[0] == TRUE
    assert ev("gte(2, 2)")[0] == TRUE
    assert ev('lt("abc", "abd")')[0] == TRUE
    assert ev('eq("a", "a")')[0] == TRUE
    assert ev("ne(1, 2)")[0] == TRUE


def test_cross_kind_comparison_is_false_with_warning():
    value, warnings = ev('eq(1, "1")')
    assert value == FALSE
    assert len(warnings) == 1
    value, warnings = ev('ne(1, "1")')  # ne also folds to false across kinds
    assert value == FALSE


def test_booleans_have_no_order():
    value, warnings = ev("lt(true, false)")
    assert value == FALSE
    assert any("no order" in w for w in warnings)


def test_comparison_with_undefined_is_false_silently():
    value, warnings = ev('eq(getEventPayload("x"), 1)')
    assert value == FALSE
    assert len(warnings) == 1  # the missing-reference warning only


def test_timestamp_number_interop_in_comparison():
    ctx = EvalContext(now=1000)
    value, _ = evaluate(parse_text("eq(now(), 1000)"), ctx)
    assert value == TRUE


def test_relative_date_trigger_window():
    # timestampWithOffset(-604800, now()) against a submission 3 days old.
    now = 1_700_000_000
    state = FakeState(last_submissions={"weekly": now - 3 * 86400})
    ctx = EvalContext(now=now, participant_state=state)
    expr = parse_text(
        'lt(timestampWithOffset(-604800, now()), getLastSubmissionDate("weekly"))'
    )
    value, warnings = evaluate(expr, ctx)
    assert value == TRUE
    assert warnings == []


# -- evaluation: arithmetic ---------------------------------------------------------


def test_arithmetic_basics():
    assert ev("sum(1, 2)")[0] == Value.number(3)
    assert ev("sub(5, 7)")[0] == Value.number(-2)
    assert ev("mul(3, 4, 0.5)")[0] == Value.number(6)
    assert ev("sum(2)")[0] == Value.number(2)


def test_arithmetic_with_undefined_is_undefined():
    value, warnings = ev('sum(1, getContext("missing"))')
    assert value == UNDEFINED
    assert len(warnings) == 1


def test_arithmetic_with_text_warns():
    value, warnings = ev('sum(1, "x")')
    assert value == UNDEFINED
    assert any("expected number" in w for w in warnings)


def test_non_finite_result_is_undefined():
    value, warnings = ev("mul(1e300, 1e300)")
    assert value == UNDEFINED
    assert any("not finite" in w for w in warnings)


def test_timestamps_coerce_in_arithmetic():
    ctx = EvalContext(now=100)
    value, _ = evaluate(parse_text("sum(now(), 50)"), ctx)
    assert value == Value.number(150)


# -- evaluation: time ---------------------------------------------------------------


def test_now_reads_injected_clock():
    assert evaluate(parse_text("now()"), EvalContext(now=777))[0] == Value.timestamp(777)


def test_timestamp_with_offset_defaults_to_now():
    ctx = EvalContext(now=1000)
    assert evaluate(parse_text("timestampWithOffset(-10)"), ctx)[0] == Value.timestamp(990)


def test_timestamp_with_offset_truncates_toward_zero():
    ctx = EvalContext(now=0)
    assert evaluate(parse_text("timestampWithOffset(1.9, 0)"), ctx)[0] == Value.timestamp(1)
    assert evaluate(parse_text("timestampWithOffset(-1.9, 0)"), ctx)[0] == Value.timestamp(-1)


# -- evaluation: context lookups -----------------------------------------------------


def test_study_flag_without_state_is_undefined_with_one_warning():
    value, warnings = ev('getStudyFlag("cohort")')
    assert value == UNDEFINED
    assert len(warnings) == 1
    assert "getStudyFlag" in warnings[0]


def test_study_flag_lookup():
    state = FakeState(flags={"cohort": Value.text("b")})
    ctx = EvalContext(now=0, participant_state=state)
    assert evaluate(parse_text('getStudyFlag("cohort")'), ctx)[0] == Value.text("b")


def test_has_study_status():
    ctx = EvalContext(now=0, participant_state=FakeState(study_status="paused"))
    assert evaluate(parse_text('hasStudyStatus("paused")'), ctx)[0] == TRUE
    assert evaluate(parse_text('hasStudyStatus("active")'), ctx)[0] == FALSE


def test_response_value_lookup_and_missing_warning():
    resp = DictResponse({"Q1": {"scg": Value.text("yes")}})
    ctx = EvalContext(now=0, current_response=resp)
    assert evaluate(parse_text('getResponseValue("Q1","scg")'), ctx)[0] == Value.text("yes")
    value, warnings = evaluate(parse_text('getResponseValue("Q2","scg")'), ctx)
    assert value == UNDEFINED
    assert warnings == ["getResponseValue: no value for Q2.scg"]


def test_multi_choice_value_joins_keys():
    resp = DictResponse({"Q3": {"mcg": ["a", "c"]}})
    ctx = EvalContext(now=0, current_response=resp)
    assert evaluate(parse_text('getResponseValue("Q3","mcg")'), ctx)[0] == Value.text("a,c")
    assert evaluate(parse_text('countSelected("Q3")'), ctx)[0] == Value.number(2)


def test_has_response_empty_values_do_not_count():
    resp = DictResponse({"Q1": {"t": Value.text("")}, "Q2": {"m": []}})
    ctx = EvalContext(now=0, current_response=resp)
    assert evaluate(parse_text('hasResponse("Q1","t")'), ctx)[0] == FALSE
    assert evaluate(parse_text('hasResponse("Q2","m")'), ctx)[0] == FALSE
    assert evaluate(parse_text('hasResponse("Q3","x")'), ctx)[0] == FALSE


def test_prev_response_lookup():
    prev = DictResponse({"Q1": {"scg": Value.text("no")}})
    ctx = EvalContext(now=0, previous_responses={"weekly": prev})
    expr = parse_text('getPrevResponseValue("weekly","Q1","scg")')
    assert evaluate(expr, ctx)[0] == Value.text("no")
    value, warnings = evaluate(
        parse_text('getPrevResponseValue("intake","Q1","scg")'), ctx
    )
    assert value == UNDEFINED
    assert "no previous response for intake" in warnings[0]


def test_event_payload_and_external_context():
    ctx = EvalContext(
        now=0,
        event_payload={"positive": TRUE},
        external_context={"temperature": Value.number(21.5)},
    )
    assert evaluate(parse_text('getEventPayload("positive")'), ctx)[0] == TRUE
    assert evaluate(parse_text('getContext("temperature")'), ctx)[0] == Value.number(21.5)


def test_evaluation_is_pure():
    expr = parse_text('and(gte(sum(1,2,3), 6), eq("a","a"))')
    first = evaluate(expr, EMPTY_CONTEXT)
    second = evaluate(expr, EMPTY_CONTEXT)
    assert first == second == (TRUE, [])


def test_warning_completeness_names_each_missing_reference():
    expr = parse_text('sum(mul(2, getContext("alpha")), 1)')
    value, warnings = evaluate(expr, EMPTY_CONTEXT)
    assert value == UNDEFINED
    assert warnings == ["getContext: no context key alpha"]


def test_catalog_is_closed_and_consistent():
    for name, spec in CATALOG.items():
        assert spec.name == name
        assert spec.min_arity >= 0
        if spec.max_arity is not None:
            assert spec.max_arity >= spec.min_arity
