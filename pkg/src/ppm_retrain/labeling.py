"""Label rules: boolean expressions over complete traces, plus a small text syntax.

Grammar (case-insensitive keywords)::

    expr    := term ("OR" term)*
    term    := factor ("AND" factor)*
    factor  := "NOT" factor | "!" factor | "(" expr ")" | atom
    atom    := template "(" args ")"                  DECLARE constraint holds
             | "at" "(" int ")" "=" activity          activity at 1-based position
             | "count" "(" activity ")" op int        number of occurrences
             | "count" "(" name op value ")" op int   events whose attribute matches
             | name op value                          attribute comparison
             | name "in" "{" v1 "," v2 ... "}"        membership (sugar for OR of "=")
"""
from __future__ import annotations

import operator
import re
from dataclasses import dataclass, replace
from typing import Any

from . import declare
from .errors import RuleSyntax, UnknownAttribute
from .eventlog import UNKNOWN, EventLog, Trace, infer_schema

OPS = {
    "=": operator.eq, "==": operator.eq, "!=": operator.ne, "≠": operator.ne,
    "<": operator.lt, "<=": operator.le, "≤": operator.le,
    ">": operator.gt, ">=": operator.ge, "≥": operator.ge,
}


def _compare(left, op: str, right) -> bool:
    if left is None or left == UNKNOWN:
        return op in ("!=", "≠")
    if isinstance(right, (int, float)) and not isinstance(left, (int, float)):
        try:
            left = float(left)
        except (TypeError, ValueError):
            return op in ("!=", "≠")
    if isinstance(left, (int, float)) and isinstance(right, str):
        return op in ("!=", "≠")
    try:
        return OPS[op](left, right)
    except TypeError:
        return False


class Rule:
    def __call__(self, trace: Trace) -> bool:
        return self.holds(trace)

    def holds(self, trace: Trace) -> bool:
        raise NotImplementedError

    def attribute_names(self) -> set[str]:
        return set()


@dataclass(frozen=True)
class DeclareHolds(Rule):
    constraint: declare.Constraint

    def holds(self, trace):
        return declare.evaluate(self.constraint, trace).status is not declare.Status.VIOLATED

    def __str__(self):
        return str(self.constraint)


@dataclass(frozen=True)
class AttrCompare(Rule):
    """Trace attribute if the trace has it, otherwise: does any event match."""
    name: str
    op: str
    value: Any

    def holds(self, trace):
        if self.name in trace.attributes:
            return _compare(trace.attributes[self.name], self.op, self.value)
        hits = [e.attributes[self.name] for e in trace.events if self.name in e.attributes]
        if not hits:
            return _compare(None, self.op, self.value)
        return any(_compare(v, self.op, self.value) for v in hits)

    def event_holds(self, event) -> bool:
        return _compare(event.attributes.get(self.name), self.op, self.value)

    def attribute_names(self):
        return {self.name}

    def __str__(self):
        return f"{self.name} {self.op} {self.value}"


@dataclass(frozen=True)
class ActivityAt(Rule):
    position: int  # 1-based
    activity: str

    def holds(self, trace):
        return 1 <= self.position <= len(trace.events) and \
            trace.events[self.position - 1].activity == self.activity

    def __str__(self):
        return f"at({self.position}) = {self.activity}"


@dataclass(frozen=True)
class CountCompare(Rule):
    """Count events with a given activity, or whose attribute satisfies `event_filter`."""
    op: str
    value: int
    activity: str | None = None
    event_filter: AttrCompare | None = None

    def holds(self, trace):
        if self.activity is not None:
            n = sum(1 for e in trace.events if e.activity == self.activity)
        else:
            n = sum(1 for e in trace.events if self.event_filter.event_holds(e))
        return OPS[self.op](n, self.value)

    def attribute_names(self):
        return self.event_filter.attribute_names() if self.event_filter else set()

    def __str__(self):
        inner = self.activity if self.activity is not None else str(self.event_filter)
        return f"count({inner}) {self.op} {self.value}"


@dataclass(frozen=True)
class And(Rule):
    parts: tuple

    def holds(self, trace):
        return all(p.holds(trace) for p in self.parts)

    def attribute_names(self):
        return set().union(*(p.attribute_names() for p in self.parts))

    def __str__(self):
        return " AND ".join(f"({p})" if isinstance(p, Or) else str(p) for p in self.parts)


@dataclass(frozen=True)
class Or(Rule):
    parts: tuple

    def holds(self, trace):
        return any(p.holds(trace) for p in self.parts)

    def attribute_names(self):
        return set().union(*(p.attribute_names() for p in self.parts))

    def __str__(self):
        return " OR ".join(str(p) for p in self.parts)


@dataclass(frozen=True)
class Not(Rule):
    inner: Rule

    def holds(self, trace):
        return not self.inner.holds(trace)

    def attribute_names(self):
        return self.inner.attribute_names()

    def __str__(self):
        return f"NOT ({self.inner})"


def apply_labeling(log_: EventLog, rule: Rule) -> EventLog:
    """Label every complete trace positive iff `rule` holds on it."""
    schema = infer_schema(log_.traces)
    for name in sorted(rule.attribute_names()):
        if name not in schema:
            raise UnknownAttribute(name)
    return EventLog([replace(t, label=bool(rule.holds(t))) for t in log_])


# -------------------------------------------------------------------- parser

_TOKEN = re.compile(r"""
    \s*(?:
      (?P<op><=|>=|!=|==|≤|≥|≠|<|>|=)
    | (?P<punct>[(),{}!])
    | (?P<word>[^\s(),{}!<>=≤≥≠]+)
    )""", re.VERBOSE)

_KEYWORDS = {"and", "or", "not", "in"}


def _tokenize(text: str):
    pos, out = 0, []
    text = text.strip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise RuleSyntax(f"unexpected character at {pos}: {text[pos:pos + 10]!r}")
        pos = m.end()
        kind = m.lastgroup
        out.append((kind, m.group(kind)))
    return out


def _literal(text: str):
    low = text.lower()
    if low in ("true", "false"):
        return low == "true"
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def _integer(text: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise RuleSyntax(f"expected an integer, got {text!r}") from None


class _Parser:
    def __init__(self, text):
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self, k=0):
        j = self.i + k
        return self.toks[j] if j < len(self.toks) else (None, None)

    def take(self, value=None):
        tok = self.peek()
        if tok[0] is None:
            raise RuleSyntax("unexpected end of rule")
        if value is not None and tok[1] != value:
            raise RuleSyntax(f"expected {value!r}, got {tok[1]!r}")
        self.i += 1
        return tok

    def kw(self, word):
        k, v = self.peek()
        return k == "word" and v.lower() == word

    def name(self):
        """Multi-word names: words joined by single spaces."""
        words = []
        while True:
            k, v = self.peek()
            if k != "word" or v.lower() in _KEYWORDS:
                break
            words.append(v)
            self.i += 1
        if not words:
            raise RuleSyntax(f"expected a name at token {self.peek()[1]!r}")
        return " ".join(words)

    def parse(self):
        rule = self.expr()
        if self.peek()[0] is not None:
            raise RuleSyntax(f"trailing input at {self.peek()[1]!r}")
        return rule

    def expr(self):
        parts = [self.term()]
        while self.kw("or"):
            self.i += 1
            parts.append(self.term())
        return parts[0] if len(parts) == 1 else Or(tuple(parts))

    def term(self):
        parts = [self.factor()]
        while self.kw("and"):
            self.i += 1
            parts.append(self.factor())
        return parts[0] if len(parts) == 1 else And(tuple(parts))

    def factor(self):
        if self.kw("not") or self.peek() == ("punct", "!"):
            self.i += 1
            return Not(self.factor())
        if self.peek() == ("punct", "("):
            self.i += 1
            inner = self.expr()
            self.take(")")
            return inner
        return self.atom()

    def _args(self):
        self.take("(")
        args = [self.name()]
        while self.peek() == ("punct", ","):
            self.i += 1
            args.append(self.name())
        self.take(")")
        return args

    def atom(self):
        head = self.name()
        low = head.lower().replace(" ", "_")
        if self.peek() == ("punct", "("):
            if low == "at":
                pos = _integer(self._args()[0])
                self.take("=") if self.peek()[1] == "=" else self.take("==")
                return ActivityAt(pos, self.name())
            if low == "count":
                self.take("(")
                inner = self.name()
                filt = None
                if self.peek()[0] == "op":
                    op = self.take()[1]
                    filt = AttrCompare(inner, op, _literal(self.name()))
                self.take(")")
                op = self.take()[1]
                n = _integer(self.name())
                return CountCompare(op, n, None if filt else inner, filt)
            try:
                template = declare.Template(low)
            except ValueError:
                raise RuleSyntax(f"unknown function {head!r}")
            return DeclareHolds(declare.Constraint(template, tuple(self._args())))
        if self.kw("in"):
            self.i += 1
            self.take("{")
            vals = [self.name()]
            while self.peek() == ("punct", ","):
                self.i += 1
                vals.append(self.name())
            self.take("}")
            return Or(tuple(AttrCompare(head, "=", _literal(v)) for v in vals))
        kind, op = self.take()
        if kind != "op":
            raise RuleSyntax(f"expected comparison after {head!r}")
        return AttrCompare(head, op, _literal(self.name()))


def parse_rule(text: str) -> Rule:
    return _Parser(text).parse()
