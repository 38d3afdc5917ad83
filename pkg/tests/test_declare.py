import itertools
import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from ppm_retrain import declare
from ppm_retrain.declare import (Constraint, Status, Template, align, align_activities, chain_response,
                                 coexistence, discover, encode, encode_value, evaluate, existence,
                                 filter_subsumed, not_succession, parse_constraint, precedence, response)
from ppm_retrain.errors import ConstraintSyntax, Unalignable
from ppm_retrain.eventlog import Event, EventLog, Trace

ALPHABET = "abc"


# Independent checker: list the activation positions of each template and
# decide each activation on its own, straight from the template definitions.
def oracle(template, params, t):
    a = params[0]
    b = params[-1]
    n = len(t)
    if template is Template.EXISTENCE:
        acts = [i for i in range(n) if t[i] == a]
        if not acts:
            return ("violated", 1, 0, 1)
        outcomes = [True] * len(acts)
    elif template is Template.RESPONSE:
        outcomes = [any(t[j] == b for j in range(i + 1, n)) for i in range(n) if t[i] == a]
    elif template is Template.CHAIN_RESPONSE:
        outcomes = [i + 1 < n and t[i + 1] == b for i in range(n) if t[i] == a]
    elif template is Template.PRECEDENCE:
        outcomes = [any(t[j] == a for j in range(i)) for i in range(n) if t[i] == b]
    elif template is Template.NOT_SUCCESSION:
        outcomes = [not any(t[j] == b for j in range(i + 1, n)) for i in range(n) if t[i] == a]
    elif template is Template.COEXISTENCE:
        outcomes = []
        for i in range(n):
            if t[i] == a:
                outcomes.append(b in t)
            elif t[i] == b:
                outcomes.append(a in t)
    act = len(outcomes)
    viol = outcomes.count(False)
    status = "violated" if viol else ("vacuous" if act == 0 else "satisfied")
    return (status, act, act - viol, viol)


def oracle_value(template, params, t):
    status, act, _, _ = oracle(template, params, t)
    return -1 if status == "violated" else (0 if status == "vacuous" else act)


STATUS_NAME = {Status.VIOLATED: "violated", Status.VACUOUS: "vacuous", Status.SATISFIED: "satisfied"}


def all_constraints(alphabet=ALPHABET):
    out = [existence(a) for a in alphabet]
    for t in Template:
        if t.arity == 2:
            out += [Constraint(t, (a, b)) for a in alphabet for b in alphabet]
    return out


def all_traces(alphabet=ALPHABET, max_len=6):
    for k in range(max_len + 1):
        yield from itertools.product(alphabet, repeat=k)


def test_exhaustive_agreement_with_oracle():
    constraints = all_constraints()
    checked = 0
    for t in all_traces():
        for c in constraints:
            r = evaluate(c, t)
            got = (STATUS_NAME[r.status], r.activations, r.fulfillments, r.violations)
            assert got == oracle(c.template, c.params, t), (c, t)
            checked += 1
    assert checked == 1093 * len(constraints)


# ---------------------------------------------------------------- worked examples

LONG = tuple("abcabcdab")


def test_response_violated_on_third_activation():
    r = evaluate(response("a", "c"), LONG)
    assert (r.status, r.activations, r.fulfillments, r.violations) == (Status.VIOLATED, 3, 2, 1)


def test_response_satisfied_three_times():
    r = evaluate(response("a", "b"), LONG)
    assert r.status is Status.SATISFIED and r.activations == 3
    assert encode_value(r) == 3


def test_response_d_b_follows_activation_semantics():
    # d (position 7) is followed by b (position 9): one fulfilled activation,
    # so neither vacuous nor violated
    r = evaluate(response("d", "b"), LONG)
    assert (r.status, r.activations, r.violations) == (Status.SATISFIED, 1, 0)
    assert encode_value(r) == 1
    assert oracle_value(Template.RESPONSE, ("d", "b"), LONG) == 1
    # the vacuous case proper: d never occurs
    r = evaluate(response("d", "b"), tuple("abc"))
    assert r.status is Status.VACUOUS and encode_value(r) == 0
    # an unanswered d is a violation
    assert evaluate(response("d", "b"), tuple("abcd")).status is Status.VIOLATED


@pytest.mark.parametrize("trace,status,fulfilled,violated", [
    ("aabc", Status.SATISFIED, 2, 0),
    ("bbcd", Status.VACUOUS, 0, 0),
    ("abab", Status.SATISFIED, 2, 0),
    ("abac", Status.VIOLATED, 1, 1),
])
def test_response_accounting_t1_to_t4(trace, status, fulfilled, violated):
    r = evaluate(response("a", "b"), tuple(trace))
    assert (r.status, r.fulfillments, r.violations) == (status, fulfilled, violated)


def test_encode_values():
    assert encode(existence("a"), ("b",)) == -1
    assert encode(response("a", "b"), ("c",)) == 0
    assert encode(response("a", "b"), LONG) == 3


def test_existence_absence_is_violation_not_vacuity():
    assert evaluate(existence("a"), ()).status is Status.VIOLATED


@given(st.lists(st.sampled_from(ALPHABET), max_size=8))
def test_encoded_values_are_minus_one_zero_or_count(t):
    for c in all_constraints():
        v = encode(c, t)
        assert v in (-1, 0) or v >= 1


@given(st.lists(st.sampled_from(ALPHABET), max_size=6), st.lists(st.sampled_from(ALPHABET), max_size=4))
def test_not_succession_violation_survives_extension(prefix, tail):
    for a, b in itertools.product(ALPHABET, repeat=2):
        c = not_succession(a, b)
        if evaluate(c, prefix).status is Status.VIOLATED:
            assert evaluate(c, prefix + tail).status is Status.VIOLATED


def test_result_invariants_hold_everywhere():
    for t in all_traces(max_len=4):
        for c in all_constraints():
            r = evaluate(c, t)
            assert r.fulfillments + r.violations == r.activations
            assert (r.status is Status.VIOLATED) == (r.violations >= 1)


# ---------------------------------------------------------------- syntax

def test_parse_constraint_round_trip():
    c = parse_constraint("response(Register, Accept Claim)")
    assert c == response("Register", "Accept Claim") and str(c) == "response(Register, Accept Claim)"
    assert parse_constraint("!existence(a)") == existence("a")


@pytest.mark.parametrize("text", ["response(a)", "eventually(a)", "response a b", "existence()"])
def test_parse_constraint_errors(text):
    with pytest.raises(ConstraintSyntax):
        parse_constraint(text)


# ---------------------------------------------------------------- discovery & subsumption

def log_of(*seqs):
    return EventLog([Trace(f"c{i}", [Event(a) for a in s]) for i, s in enumerate(seqs)])


def test_discover_generates_both_orders():
    cs = discover(log_of("ab"), 0.0, {Template.RESPONSE})
    assert response("a", "b") in cs and response("b", "a") in cs


def test_discover_full_support_drops_contradicted():
    cs = discover(log_of("ab", "ba"), 1.0, {Template.RESPONSE})
    assert response("a", "b") not in cs and response("b", "a") not in cs


def test_discover_is_deterministic_and_sorted():
    log_ = log_of("abc", "acb", "bca", "cab", "aab")
    one, two = discover(log_, 0.25), discover(log_, 0.25)
    assert one == two
    assert one == sorted(one, key=Constraint.sort_key)


def test_chain_response_implies_response_on_all_short_traces():
    for t in all_traces("ab", 4):
        if evaluate(chain_response("a", "b"), t).status is not Status.VIOLATED:
            assert evaluate(response("a", "b"), t).status is not Status.VIOLATED


def test_filter_subsumed():
    ch, r = chain_response("a", "b"), response("a", "b")
    assert filter_subsumed([ch, r]) == [ch]
    assert filter_subsumed([r]) == [r]
    assert filter_subsumed([r, r]) == [r]
    assert filter_subsumed([response("b", "a"), ch]) == [response("b", "a"), ch]


# ---------------------------------------------------------------- alignment

def trace_of(s):
    return Trace("t", [Event(a) for a in s])


def test_align_inserts_missing_activity():
    out = align(trace_of("b"), existence("a"), 1, 2)
    assert out.activities == ("a", "b")


def test_align_no_edit_when_target_holds():
    t = trace_of("ab")
    assert align(t, response("a", "b"), 1, 3).activities == ("a", "b")
    assert align_activities(("a", "b"), response("a", "b"), 1, 3) == (("a", "b"), [])


def test_align_prefers_leftmost_insertion():
    assert align(trace_of("ac"), response("a", "b"), 1, 2).activities == ("a", "b", "c")


def test_align_unreachable_raises():
    with pytest.raises(Unalignable):
        align(trace_of("aaaa"), existence("a"), 0, 3)
    with pytest.raises(Unalignable):
        align(trace_of(""), existence("a"), 5, 3)


def test_inserted_events_have_no_attributes():
    t = Trace("t", [Event("b", attributes={"dept": "x"})])
    out = align(t, existence("a"), 1, 2)
    assert out.events[0].attributes == {} and out.events[1].attributes == {"dept": "x"}


def min_edits(acts, constraint, target, limit):
    """Level-by-level enumeration of every trace within `limit` insert/delete
    edits; insertions may use any activity of the constraint or a fresh one."""
    symbols = sorted(set(constraint.params)) + ["z"]
    level = {tuple(acts)}
    seen = set(level)
    for d in range(limit + 1):
        if any(encode(constraint, t) == target for t in level):
            return d
        nxt = set()
        for t in level:
            for i in range(len(t) + 1):
                for s in symbols:
                    nxt.add(t[:i] + (s,) + t[i:])
            for i in range(len(t)):
                nxt.add(t[:i] + t[i + 1:])
        level = nxt - seen
        seen |= level
    return None


def test_alignment_minimality_randomized():
    rng = random.Random(7)
    constraints = all_constraints()
    reached = 0
    for _ in range(100):
        acts = tuple(rng.choice(ALPHABET) for _ in range(rng.randint(0, 5)))
        c = rng.choice(constraints)
        target = rng.choice([-1, 0, 1, 2, 3])
        best = min_edits(acts, c, target, 3)
        found = align_activities(acts, c, target, 3)
        if best is None:
            assert found is None
            with pytest.raises(Unalignable):
                align(trace_of(acts), c, target, 3)
            continue
        reached += 1
        edited, script = found
        assert len(script) == best
        assert encode(c, edited) == target
        assert encode(c, align(trace_of(acts), c, target, 3)) == target
    assert reached > 50
