"""DECLARE constraints over finite traces: checking, discovery, alignment."""
from __future__ import annotations

import enum
import itertools
import re
from collections import deque
from dataclasses import dataclass, replace
from typing import Iterable, Sequence, Union

from .errors import ConstraintSyntax, Unalignable
from .eventlog import Event, EventLog, Trace


class Template(enum.Enum):
    EXISTENCE = "existence"
    RESPONSE = "response"
    CHAIN_RESPONSE = "chain_response"
    PRECEDENCE = "precedence"
    NOT_SUCCESSION = "not_succession"
    COEXISTENCE = "coexistence"

    @property
    def arity(self) -> int:
        return 1 if self is Template.EXISTENCE else 2

    @property
    def order(self) -> int:
        return list(Template).index(self)


ALL_TEMPLATES = frozenset(Template)


@dataclass(frozen=True)
class Constraint:
    template: Template
    params: tuple[str, ...]

    def __post_init__(self):
        if len(self.params) != self.template.arity:
            raise ValueError(f"{self.template.value} takes {self.template.arity} parameter(s)")
        if not all(isinstance(p, str) and p for p in self.params):
            raise ValueError("constraint parameters must be non-empty strings")

    def __str__(self):
        return f"{self.template.value}({', '.join(self.params)})"

    def sort_key(self):
        return (self.template.order, self.params)


def existence(a):
    return Constraint(Template.EXISTENCE, (a,))


def response(a, b):
    return Constraint(Template.RESPONSE, (a, b))


def chain_response(a, b):
    return Constraint(Template.CHAIN_RESPONSE, (a, b))


def precedence(a, b):
    return Constraint(Template.PRECEDENCE, (a, b))


def not_succession(a, b):
    return Constraint(Template.NOT_SUCCESSION, (a, b))


def coexistence(a, b):
    return Constraint(Template.COEXISTENCE, (a, b))


_SYNTAX = re.compile(r"^\s*!?\s*([A-Za-z_ ]+?)\s*\((.*)\)\s*$")


def parse_constraint(text: str) -> Constraint:
    """``template(p1[, p2])``; a leading ``!`` is tolerated and ignored."""
    m = _SYNTAX.match(text)
    if not m:
        raise ConstraintSyntax(f"cannot parse constraint {text!r}")
    name = m.group(1).strip().lower().replace(" ", "_")
    try:
        template = Template(name)
    except ValueError:
        raise ConstraintSyntax(f"unknown template {m.group(1)!r}")
    params = tuple(p.strip() for p in m.group(2).split(","))
    try:
        return Constraint(template, params)
    except ValueError as exc:
        raise ConstraintSyntax(str(exc))


# ---------------------------------------------------------------- evaluation

class Status(enum.Enum):
    VIOLATED = "violated"
    VACUOUS = "vacuously_satisfied"
    SATISFIED = "satisfied"


@dataclass(frozen=True)
class EvaluationResult:
    status: Status
    activations: int
    fulfillments: int
    violations: int


def _activities(trace) -> Sequence[str]:
    if isinstance(trace, Trace):
        return trace.activities
    return tuple(trace)


def _result(act: int, viol: int) -> EvaluationResult:
    if viol:
        status = Status.VIOLATED
    elif act == 0:
        status = Status.VACUOUS
    else:
        status = Status.SATISFIED
    return EvaluationResult(status, act, act - viol, viol)


def evaluate(constraint: Constraint, trace: Union[Trace, Sequence[str]]) -> EvaluationResult:
    acts = _activities(trace)
    t = constraint.template
    a = constraint.params[0]

    if t is Template.EXISTENCE:
        n = acts.count(a)
        # absence is one violated obligation at trace end, never vacuous
        return _result(1, 1) if n == 0 else _result(n, 0)

    b = constraint.params[1]
    if t is Template.RESPONSE:
        # an `a` is fulfilled iff some `b` occurs strictly after it
        last_b = -1
        for i, x in enumerate(acts):
            if x == b:
                last_b = i
        act = viol = 0
        for i, x in enumerate(acts):
            if x == a:
                act += 1
                if i >= last_b:
                    viol += 1
        return _result(act, viol)

    if t is Template.CHAIN_RESPONSE:
        act = viol = 0
        n = len(acts)
        for i, x in enumerate(acts):
            if x == a:
                act += 1
                if i + 1 >= n or acts[i + 1] != b:
                    viol += 1
        return _result(act, viol)

    if t is Template.PRECEDENCE:
        act = viol = 0
        seen_a = False
        for x in acts:
            if x == b:
                act += 1
                if not seen_a:
                    viol += 1
            if x == a:
                seen_a = True
        return _result(act, viol)

    if t is Template.NOT_SUCCESSION:
        last_b = -1
        for i, x in enumerate(acts):
            if x == b:
                last_b = i
        act = viol = 0
        for i, x in enumerate(acts):
            if x == a:
                act += 1
                if i < last_b:
                    viol += 1
        return _result(act, viol)

    if t is Template.COEXISTENCE:
        na, nb = acts.count(a), acts.count(b)
        if a == b:
            return _result(na, 0)
        viol = (na if nb == 0 else 0) + (nb if na == 0 else 0)
        return _result(na + nb, viol)

    raise AssertionError(t)


def encode_value(result: EvaluationResult) -> int:
    if result.status is Status.VIOLATED:
        return -1
    if result.status is Status.VACUOUS:
        return 0
    return result.activations


def encode(constraint: Constraint, trace) -> int:
    return encode_value(evaluate(constraint, trace))


# ----------------------------------------------------------------- discovery

def filter_subsumed(constraints: Iterable[Constraint]) -> list[Constraint]:
    """Drop duplicates, and response(a,b) wherever chain_response(a,b) is present."""
    cs = list(constraints)
    chains = {c.params for c in cs if c.template is Template.CHAIN_RESPONSE}
    out, seen = [], set()
    for c in cs:
        if c in seen:
            continue
        if c.template is Template.RESPONSE and c.params in chains:
            continue
        seen.add(c)
        out.append(c)
    return out


def discover(log_: EventLog, support: float = 0.25,
             templates: Iterable[Template] = ALL_TEMPLATES,
             count_vacuous: bool = True) -> list[Constraint]:
    """Apriori-style discovery of frequent activity sets, then template instantiation.

    A candidate is kept when it holds (vacuously or not, unless
    ``count_vacuous`` is off) in at least ``support`` of the traces.
    """
    if len(log_) == 0:
        raise ValueError("cannot discover constraints on an empty log")
    templates = set(templates)
    n = len(log_)
    seqs = [t.activities for t in log_]
    sets = [frozenset(s) for s in seqs]
    single = {}
    for s in sets:
        for a in s:
            single[a] = single.get(a, 0) + 1
    freq1 = sorted(a for a, c in single.items() if c / n >= support)
    freq2 = []
    for a, b in itertools.combinations(freq1, 2):
        co = sum(1 for s in sets if a in s and b in s)
        if co / n >= support:
            freq2.append((a, b))

    candidates = []
    if Template.EXISTENCE in templates:
        candidates += [existence(a) for a in freq1]
    binary = [t for t in Template if t.arity == 2 and t in templates]
    for a, b in freq2:
        for t in binary:
            candidates.append(Constraint(t, (a, b)))
            candidates.append(Constraint(t, (b, a)))

    kept = []
    for c in candidates:
        ok = 0
        for s in seqs:
            st = evaluate(c, s).status
            if st is Status.SATISFIED or (count_vacuous and st is Status.VACUOUS):
                ok += 1
        if ok / n >= support:
            kept.append(c)
    kept.sort(key=Constraint.sort_key)
    return filter_subsumed(kept)


# ----------------------------------------------------------------- alignment

def _neighbours(acts: tuple, alphabet: tuple):
    """Single-event edits: insertions (left to right) before deletions."""
    for pos in range(len(acts) + 1):
        for sym in alphabet:
            yield ("ins", pos, sym), acts[:pos] + (sym,) + acts[pos:]
    for pos in range(len(acts)):
        yield ("del", pos, acts[pos]), acts[:pos] + acts[pos + 1:]


def align_activities(acts: Sequence[str], constraint: Constraint, target: int,
                     edit_budget: int):
    """Breadth-first search for a minimal insert/delete edit script.

    Returns ``(edited activities, edit script)``; ``None`` when the target is
    not reachable within the budget.
    """
    start = tuple(acts)
    if encode(constraint, start) == target:
        return start, []
    alphabet = tuple(dict.fromkeys(constraint.params))
    seen = {start}
    frontier = deque([(start, [])])
    while frontier:
        cur, script = frontier.popleft()
        if len(script) >= edit_budget:
            continue
        for edit, nxt in _neighbours(cur, alphabet):
            if nxt in seen:
                continue
            seen.add(nxt)
            nscript = script + [edit]
            if encode(constraint, nxt) == target:
                return nxt, nscript
            frontier.append((nxt, nscript))
    return None


def apply_script(events: list[Event], script) -> list[Event]:
    out = list(events)
    for kind, pos, sym in script:
        if kind == "ins":
            out.insert(pos, Event(sym))
        else:
            del out[pos]
    return out


def align(trace: Trace, constraint: Constraint, target_value: int, edit_budget: int = 3) -> Trace:
    """Minimal-edit variant of `trace` whose encoding of `constraint` is `target_value`.

    Inserted events carry no attributes (encoders read them as "unknown").
    Raises `Unalignable` when no trace within `edit_budget` edits exists.
    """
    if target_value < -1:
        raise ValueError("target must be -1, 0 or a positive count")
    found = align_activities(trace.activities, constraint, target_value, edit_budget)
    if found is None:
        raise Unalignable(trace.case_id, str(constraint), target_value)
    _, script = found
    aligned = replace(trace, events=apply_script(trace.events, script))
    assert encode(constraint, aligned) == target_value
    return aligned
