"""Parser, printer, structural rules, and the size measure."""
from __future__ import annotations

from random import Random

import pytest
from hypothesis import given, settings, strategies as st

from gtproj import (
    Branch,
    Choice,
    END,
    End,
    Message,
    ParseError,
    Rec,
    Role,
    Var,
    WellFormednessRule,
    exchange,
    measure_size,
    messages_of,
    parse_global_type,
    pretty,
    pretty_inline,
    roles_of,
    subterms,
    validate_well_formedness,
)
from gtproj.corpus import entries, load, names

from .strategies import random_global_type, rename_consistently

P, Q, R = Role("p"), Role("q"), Role("r")

global_types = st.builds(
    lambda seed: random_global_type(Random(seed)), st.integers(0, 2**32 - 1)
)


# --------------------------------------------------------------------------- #
# Parsing
# --------------------------------------------------------------------------- #


def test_parse_end():
    assert parse_global_type("0") is END


def test_parse_single_exchange():
    g = parse_global_type("p->q:m . 0")
    assert isinstance(g, Choice)
    assert g.sender == P
    assert g.branches == (Branch(Q, Message("m"), END),)


def test_parse_multi_branch_choice():
    g = parse_global_type("+ { p->q:o . 0, p->r:m . 0 }")
    assert isinstance(g, Choice)
    assert g.sender == P
    assert [(b.receiver, b.message) for b in g.branches] == [
        (Q, Message("o")),
        (R, Message("m")),
    ]


def test_parse_recursion_and_variable():
    g = parse_global_type("mu t . p->q:m . t")
    assert isinstance(g, Rec)
    assert g.var == "t"
    body = g.body
    assert isinstance(body, Choice)
    assert body.branches[0].continuation == Var("t")


def test_parse_comments_and_whitespace():
    text = """
    // a protocol
    + {
      p->q:o . 0,  // first
      p->q:m . 0
    }
    """
    g = parse_global_type(text)
    assert isinstance(g, Choice) and len(g.branches) == 2


def test_parse_interns_shared_subterms():
    g = parse_global_type("+ { p->q:o . r->q:b . 0, p->q:m . r->q:b . 0 }")
    assert isinstance(g, Choice)
    first, second = (b.continuation for b in g.branches)
    assert first == second and first.intern_id == second.intern_id
    # the shared continuation appears once among the distinct subterms
    assert sum(1 for n in subterms(g) if n == first) == 1


def test_parse_same_text_yields_equal_terms():
    text = "mu t . + { p->q:o . t, p->q:m . 0 }"
    assert parse_global_type(text) == parse_global_type(text)


@pytest.mark.parametrize(
    "text, fragment, line, column",
    [
        ("", "expected a protocol term", 1, 1),
        ("p->q:m", "'.' after the message label", 1, 7),
        ("p->q:", "a message label after ':'", 1, 6),
        ("p->q:m . 0 extra", "end of input", 1, 12),
        ("mu t . mu t . p->q:m . t", "shadows an enclosing binder", 1, 8),
        (
            "+ { p->q:a . mu t . p->q:m . t, p->q:b . mu t . p->q:m . t }",
            "reuses the name of another binder",
            1,
            42,
        ),
        ("+ { p->q:o . 0,\n  r->q:b . 0 }", "must share one sender", 2, 3),
        ("+ { 0 }", "expected a message exchange", 1, 5),
        ("p->q:m . 0 ; 0", "unexpected character ';'", 1, 12),
        ("mu . p->q:m . 0", "a recursion variable after 'mu'", 1, 4),
    ],
)
def test_parse_errors_with_position(text, fragment, line, column):
    with pytest.raises(ParseError) as exc:
        parse_global_type(text)
    assert fragment in str(exc.value)
    assert exc.value.lineno == line
    assert exc.value.offset == column


def test_unbound_variable_parses_but_is_ill_formed():
    g = parse_global_type("p->q:m . t")
    report = validate_well_formedness(g)
    assert not report.ok
    assert {v.rule for v in report.violations} == {WellFormednessRule.UNBOUND_VARIABLE}


# --------------------------------------------------------------------------- #
# Printing
# --------------------------------------------------------------------------- #


def test_pretty_round_trips_corpus():
    for name in names():
        g = load(name)
        assert parse_global_type(pretty(g)) == g
        assert parse_global_type(pretty_inline(g)) == g


@settings(max_examples=60, deadline=None)
@given(global_types)
def test_pretty_round_trips_random(g):
    assert parse_global_type(pretty(g)) == g
    assert parse_global_type(pretty_inline(g)) == g


def test_pretty_inline_shapes():
    g = parse_global_type("+ { p->q:o . 0, p->q:m . 0 }")
    assert pretty_inline(g) == "+ { p->q:o . 0, p->q:m . 0 }"
    assert pretty_inline(parse_global_type("mu t . p->q:m . t")) == "mu t . p->q:m . t"


# --------------------------------------------------------------------------- #
# Structural rules
# --------------------------------------------------------------------------- #


def _single_rule(text: str) -> set[WellFormednessRule]:
    return {v.rule for v in validate_well_formedness(parse_global_type(text)).violations}


def test_branch_distinctness_violation():
    assert _single_rule("+ { p->q:m . 0, p->q:m . p->q:a . 0 }") == {
        WellFormednessRule.BRANCH_DISTINCTNESS
    }


def test_self_communication_violation():
    assert _single_rule("p->p:m . 0") == {WellFormednessRule.SELF_COMMUNICATION}


def test_unguarded_recursion_violation():
    assert _single_rule("mu t . t") == {WellFormednessRule.UNGUARDED}


def test_unguarded_through_nested_binder():
    assert _single_rule("mu t . mu u . t") == {WellFormednessRule.UNGUARDED}


def test_unbound_variable_violation():
    assert _single_rule("t") == {WellFormednessRule.UNBOUND_VARIABLE}


def test_unused_binder_is_well_formed():
    assert validate_well_formedness(parse_global_type("mu t . p->q:m . 0")).ok


def test_guarded_recursion_is_well_formed():
    assert validate_well_formedness(parse_global_type("mu t . p->q:m . t")).ok


def test_corpus_is_well_formed():
    for entry in entries():
        assert validate_well_formedness(entry.load()).ok, entry.name


@settings(max_examples=60, deadline=None)
@given(global_types)
def test_random_types_are_well_formed(g):
    assert validate_well_formedness(g).ok


def test_violations_carry_location_and_message():
    report = validate_well_formedness(parse_global_type("p->p:m . t"))
    rules = {v.rule for v in report.violations}
    assert rules == {
        WellFormednessRule.SELF_COMMUNICATION,
        WellFormednessRule.UNBOUND_VARIABLE,
    }
    for v in report.violations:
        assert isinstance(v.location, int)
        assert v.message


# --------------------------------------------------------------------------- #
# Roles, messages, subterms
# --------------------------------------------------------------------------- #


def test_roles_in_first_occurrence_order():
    g = load("g_s")
    assert roles_of(g) == (P, Q, R)


def test_messages_of():
    assert set(messages_of(load("g_s"))) == {Message("o"), Message("m")}


def test_subterms_are_distinct_and_include_the_root():
    g = load("g_r")
    nodes = subterms(g)
    assert nodes[0] is g
    assert len({n.intern_id for n in nodes}) == len(nodes)
    assert END in nodes


def test_end_instances_are_interchangeable():
    assert End() == END
    assert End().intern_id == END.intern_id


# --------------------------------------------------------------------------- #
# Size measure
# --------------------------------------------------------------------------- #


@pytest.mark.parametrize(
    "name, size",
    [("g_r", 12), ("g_r_prime", 16), ("g_s", 8), ("g_s_prime", 6)],
)
def test_measure_size_hand_counted(name, size):
    assert measure_size(load(name)) == size


def test_measure_size_counts_reachable_states_plus_transitions():
    # mu t . p->q:o . t: three reachable nodes (Rec, Choice, Var) and three
    # edges (unfold, exchange, loop back); the End state is unreachable.
    assert measure_size(parse_global_type("mu t . p->q:o . t")) == 6
    assert measure_size(END) == 1  # one state, no transitions


@settings(max_examples=60, deadline=None)
@given(global_types)
def test_measure_size_invariant_under_renaming(g):
    renamed = rename_consistently(
        g,
        {Role("p"): Role("z"), Role("z"): Role("p")},
        {Message("a"): Message("y"), Message("y"): Message("a")},
    )
    assert measure_size(renamed) == measure_size(g)


def test_exchange_helper_builds_single_branch_choice():
    g = exchange(P, Q, Message("m"), END)
    assert g == parse_global_type("p->q:m . 0")
