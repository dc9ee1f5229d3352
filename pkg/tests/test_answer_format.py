import time

import pytest

from rewardmap.answer_format import (
    ParsedAnswer,
    RouteAnswer,
    canonical_name,
    format_reward,
    last_boxed_content,
    normalize_scalar,
    parse_boxed,
    parse_route,
    render_route_text,
    serialize_route,
)
from rewardmap.errors import ValidationError
from rewardmap.transit_graph import Segment


ROUTE = [("L1", "A", "C"), ("L2", "C", "G")]


def test_last_boxed_content_takes_the_last_span():
    assert last_boxed_content("first \\boxed{3} then \\boxed{5}") == "5"
    assert last_boxed_content("\\boxed{\\frac{1}{2}}") == "\\frac{1}{2}"
    # an unclosed trailing span falls back to the last complete one
    assert last_boxed_content("\\boxed{4} and \\boxed{5") == "4"
    assert last_boxed_content("no answer here") is None
    assert last_boxed_content("\\boxed{\\boxed{1}}") == "1"
    assert last_boxed_content("{ \\boxed{2} and \\boxed{x \\boxed{3} y}") == "3"


@pytest.mark.parametrize(
    "raw, expected",
    [
        (" Yes. ", "yes"),
        ("NO", "no"),
        ("07", "7"),
        ("+3", "3"),
        ("-007", "-7"),
        ("-0", "0"),
        ("+000", "0"),
        ("b)", "B"),
        ("(C)", "C"),
        ("\\text{yes}", "yes"),
        ("\\text{\\text{No}}", "no"),
        ("Central Park", "Central Park"),
    ],
)
def test_normalize_scalar(raw, expected):
    assert normalize_scalar(raw) == expected
    assert normalize_scalar(normalize_scalar(raw)) == expected


def test_parse_boxed():
    parsed = parse_boxed("The map shows it. \\boxed{\\text{Yes}}")
    assert parsed == ParsedAnswer.scalar("yes")
    assert parsed.format_ok

    assert parse_boxed("the answer is 3").kind == "malformed"
    assert parse_boxed("\\boxed{ }").kind == "malformed"
    assert parse_boxed(None).kind == "malformed"
    assert parse_boxed(42).kind == "malformed"


def test_parse_route_wire_form():
    parsed = parse_route(serialize_route(ROUTE))
    assert parsed.kind == "route"
    assert parsed.route_value.segments == tuple(Segment(*s) for s in ROUTE)


def test_parse_route_wire_form_inside_prose():
    text = f"Here is my plan: {serialize_route(ROUTE)} and that is all."
    assert parse_route(text).route_value.segments[1] == Segment("L2", "C", "G")


def test_parse_route_text_form():
    text = "Let me think.\n" + render_route_text(ROUTE) + "\nDone."
    parsed = parse_route(text)
    assert parsed.format_ok
    assert parsed.route_value.segments == tuple(Segment(*s) for s in ROUTE)


def test_parse_route_text_form_keeps_multi_word_names():
    parsed = parse_route("Take Red Line from Central Park to Union Square")
    assert parsed.route_value.segments == (Segment("Red Line", "Central Park", "Union Square"),)


@pytest.mark.parametrize(
    "text",
    [
        "",
        "   ",
        "I cannot find a route.",
        "[]",
        '[{"line": "L1", "from": "", "to": "B"}]',
        '[{"line": "L1", "from": "A"}]',
        None,
        ["take L1 from A to B"],
    ],
)
def test_parse_route_malformed(text):
    parsed = parse_route(text)
    assert parsed == ParsedAnswer.malformed()
    assert format_reward(parsed) == 0.0


def test_serialize_route_is_compact():
    assert serialize_route([("L1", "A", "B")]) == '[{"line":"L1","from":"A","to":"B"}]'


def test_route_answer_rejects_blank_fields():
    with pytest.raises(ValidationError):
        RouteAnswer(())
    with pytest.raises(ValidationError):
        RouteAnswer((("L1", " ", "B"),))


def test_canonical_name():
    assert canonical_name("  Union   Square ") == "union square"
    assert canonical_name("STRASSE") == canonical_name("Straße")


def test_format_reward():
    assert format_reward(parse_boxed("\\boxed{2}")) == 1.0
    assert format_reward(parse_route(serialize_route(ROUTE))) == 1.0


"""
-------------------------------------------------------------
    HOSTILE INPUTS
-------------------------------------------------------------
"""


def test_parse_boxed_handles_very_long_integers():
    digits = "1" * 5000
    assert parse_boxed("\\boxed{" + digits + "}") == ParsedAnswer.scalar(digits)
    assert parse_boxed("\\boxed{-000" + digits + "}") == ParsedAnswer.scalar("-" + digits)


def test_unclosed_boxed_markers_are_scanned_once():
    started = time.perf_counter()
    assert parse_boxed("\\boxed{" * 50000) == ParsedAnswer.malformed()
    assert parse_boxed("\\boxed{" * 50000 + "7}").scalar_value == "7"
    assert time.perf_counter() - started < 5.0


def test_parse_route_survives_deep_nesting():
    assert parse_route("[" * 100000 + "]" * 100000) == ParsedAnswer.malformed()
    nested = "[" * 100000 + serialize_route(ROUTE) + "]" * 100000
    assert parse_route(nested) == ParsedAnswer.malformed()
