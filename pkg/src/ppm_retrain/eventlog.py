"""Event log representation, CSV/XES readers, prefixing and splitting."""
from __future__ import annotations

import csv
import io
import logging
import math
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from typing import Any, Iterable, Optional

import numpy as np

from .errors import (MalformedTimestamp, MissingColumn, MissingConceptName,
                     MixedAttributeType, TooFewTraces, XmlSyntax)

log = logging.getLogger(__name__)

UNKNOWN = "unknown"

CASE_COL = "case_id"
ACTIVITY_COL = "activity"
TIME_COL = "timestamp"
RESOURCE_COL = "resource"
LABEL_COL = "label"
TRAIN_LABEL_COL = "train_label"


@dataclass
class Event:
    activity: str
    timestamp: Optional[datetime] = None
    resource: Optional[str] = None
    attributes: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if not self.activity:
            raise ValueError("event activity must be non-empty")


@dataclass
class Trace:
    case_id: str
    events: list[Event] = field(default_factory=list)
    attributes: dict[str, Any] = field(default_factory=dict)
    label: Optional[bool] = None
    # Outcome under a (noisy) training-only labeling; see `split_dataset`.
    train_label: Optional[bool] = None

    def __post_init__(self):
        if not self.case_id:
            raise ValueError("case_id must be non-empty")

    def __len__(self):
        return len(self.events)

    @property
    def activities(self) -> tuple[str, ...]:
        return tuple(e.activity for e in self.events)


@dataclass(frozen=True)
class AttributeInfo:
    kind: str  # "trace" (static) or "event" (dynamic)
    dtype: str  # "int" | "float" | "bool" | "str"
    values: frozenset


@dataclass
class EventLog:
    traces: list[Trace] = field(default_factory=list)

    def __len__(self):
        return len(self.traces)

    def __iter__(self):
        return iter(self.traces)

    @property
    def activity_alphabet(self) -> set[str]:
        return {e.activity for t in self.traces for e in t.events}

    @property
    def attribute_schema(self) -> dict[str, AttributeInfo]:
        return infer_schema(self.traces)

    def by_id(self) -> dict[str, Trace]:
        return {t.case_id: t for t in self.traces}

    def subset(self, case_ids: Iterable[str]) -> "EventLog":
        idx = self.by_id()
        return EventLog([idx[c] for c in case_ids])


def _dtype_of(values) -> str:
    vals = [v for v in values if v != UNKNOWN]
    if not vals:
        return "str"
    if all(isinstance(v, bool) for v in vals):
        return "bool"
    if all(isinstance(v, int) and not isinstance(v, bool) for v in vals):
        return "int"
    if all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in vals):
        return "float"
    return "str"


def infer_schema(traces: Iterable[Trace]) -> dict[str, AttributeInfo]:
    static: dict[str, set] = {}
    dynamic: dict[str, set] = {}
    for t in traces:
        for k, v in t.attributes.items():
            static.setdefault(k, set()).add(v)
        for e in t.events:
            for k, v in e.attributes.items():
                dynamic.setdefault(k, set()).add(v)
    clash = set(static) & set(dynamic)
    if clash:
        name = sorted(clash)[0]
        raise MixedAttributeType(name, "used both as trace and as event attribute")
    schema = {}
    for k, vs in static.items():
        schema[k] = AttributeInfo("trace", _dtype_of(vs), frozenset(vs))
    for k, vs in dynamic.items():
        schema[k] = AttributeInfo("event", _dtype_of(vs), frozenset(vs))
    return schema


# --------------------------------------------------------------------------- CSV

def parse_timestamp(text: str) -> datetime:
    s = text.strip()
    if s.endswith("Z"):
        s = s[:-1] + "+00:00"
    ts = datetime.fromisoformat(s)
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


def _parse_value(text: str):
    if text == "":
        return UNKNOWN
    low = text.lower()
    if low in ("true", "false"):
        return low == "true"
    try:
        return int(text)
    except ValueError:
        pass
    try:
        f = float(text)
        if math.isfinite(f):
            return f
    except ValueError:
        pass
    return text


def _parse_label(text: str) -> Optional[bool]:
    t = text.strip().lower()
    if t == "":
        return None
    if t in ("true", "1", "positive", "pos", "+"):
        return True
    if t in ("false", "0", "negative", "neg", "-"):
        return False
    raise ValueError(f"bad label {text!r}")


def _column_roles(header: list[str], hints: Optional[dict[str, str]]) -> dict[str, str]:
    roles = {}
    for col in header:
        if hints and col in hints:
            roles[col] = hints[col]
        elif col in (CASE_COL, ACTIVITY_COL, TIME_COL, RESOURCE_COL, LABEL_COL, TRAIN_LABEL_COL):
            roles[col] = col
        elif col.startswith("trace:"):
            roles[col] = "trace"
        elif col.startswith("event:"):
            roles[col] = "event"
        else:
            roles[col] = "ignore"
    for needed in (CASE_COL, ACTIVITY_COL):
        if needed not in roles.values():
            raise MissingColumn(needed)
    return roles


def _attr_name(col: str) -> str:
    return col.split(":", 1)[1] if ":" in col else col


def _coerce_columns(values_by_col: dict[str, list]) -> dict[str, list]:
    """Numeric columns with some non-numeric cells are read back as strings."""
    out = {}
    for col, vals in values_by_col.items():
        kinds = {type(v) for v in vals if v != UNKNOWN}
        if str in kinds and len(kinds) > 1:
            vals = [v if v == UNKNOWN or isinstance(v, str) else _fmt(v) for v in vals]
        elif kinds == {int, float}:
            vals = [float(v) if isinstance(v, int) else v for v in vals]
        out[col] = vals
    return out


def parse_csv(source, schema_hints: Optional[dict[str, str]] = None) -> EventLog:
    """Read a log from CSV bytes/text/file object.

    Header: ``case_id,activity,timestamp[,resource][,trace:<name>...][,event:<name>...]``
    plus optional ``label``/``train_label`` columns. Empty cells mean "unknown".
    """
    if isinstance(source, (bytes, bytearray)):
        text = source.decode("utf-8")
    elif isinstance(source, str):
        text = source
    else:
        raw = source.read()
        text = raw.decode("utf-8") if isinstance(raw, (bytes, bytearray)) else raw
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise MissingColumn(CASE_COL)
    roles = _column_roles(header, schema_hints)
    col_of = {role: header.index(c) for c, role in roles.items()
              if role in (CASE_COL, ACTIVITY_COL, TIME_COL, RESOURCE_COL, LABEL_COL, TRAIN_LABEL_COL)}
    attr_cols = [(i, c, roles[c]) for i, c in enumerate(header) if roles[c] in ("trace", "event")]

    rows = [r for r in reader if any(cell.strip() for cell in r)]
    parsed_attrs = _coerce_columns({c: [_parse_value(r[i]) if i < len(r) else UNKNOWN for r in rows]
                                    for i, c, _ in attr_cols})

    cases: dict[str, list] = {}
    for rownum, r in enumerate(rows):
        cid = r[col_of[CASE_COL]]
        if not cid:
            raise MissingColumn(CASE_COL)
        ts = None
        if TIME_COL in col_of and r[col_of[TIME_COL]].strip():
            try:
                ts = parse_timestamp(r[col_of[TIME_COL]])
            except ValueError:
                raise MalformedTimestamp(rownum + 2, r[col_of[TIME_COL]])
        cases.setdefault(cid, []).append((rownum, r, ts))

    traces = []
    for cid, entries in cases.items():
        if all(ts is not None for _, _, ts in entries):
            entries = sorted(entries, key=lambda e: (e[2], e[0]))
        events, tattrs = [], {}
        label = train_label = None
        for rownum, r, ts in entries:
            eattrs = {}
            for i, c, role in attr_cols:
                v = parsed_attrs[c][rownum]
                name = _attr_name(c)
                if role == "trace":
                    if v == UNKNOWN:
                        continue
                    if name in tattrs and tattrs[name] != v:
                        raise MixedAttributeType(name, f"conflicting values in case {cid!r}")
                    tattrs[name] = v
                elif v != UNKNOWN:
                    eattrs[name] = v
            res = None
            if RESOURCE_COL in col_of and r[col_of[RESOURCE_COL]]:
                res = r[col_of[RESOURCE_COL]]
            events.append(Event(r[col_of[ACTIVITY_COL]], ts, res, eattrs))
            if LABEL_COL in col_of:
                label = _parse_label(r[col_of[LABEL_COL]]) if label is None else label
            if TRAIN_LABEL_COL in col_of:
                tl = _parse_label(r[col_of[TRAIN_LABEL_COL]])
                train_label = tl if train_label is None else train_label
        traces.append(Trace(cid, events, tattrs, label, train_label))
    out = EventLog(traces)
    infer_schema(out.traces)  # raises on trace/event name clashes
    return out


def _fmt(v) -> str:
    if v is None or v == UNKNOWN:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, datetime):
        return v.isoformat()
    return str(v)


def write_csv(log_: EventLog, dest=None) -> str:
    """Serialize to the CSV layout read by `parse_csv`; returns the text."""
    schema = infer_schema(log_.traces)
    tnames = sorted(k for k, a in schema.items() if a.kind == "trace")
    enames = sorted(k for k, a in schema.items() if a.kind == "event")
    has_res = any(e.resource for t in log_ for e in t.events)
    has_label = any(t.label is not None for t in log_)
    has_tl = any(t.train_label is not None for t in log_)
    header = [CASE_COL, ACTIVITY_COL, TIME_COL] + ([RESOURCE_COL] if has_res else [])
    header += [f"trace:{n}" for n in tnames] + [f"event:{n}" for n in enames]
    header += ([LABEL_COL] if has_label else []) + ([TRAIN_LABEL_COL] if has_tl else [])
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for t in log_:
        for e in t.events:
            row = [t.case_id, e.activity, _fmt(e.timestamp)]
            if has_res:
                row.append(e.resource or "")
            row += [_fmt(t.attributes.get(n)) for n in tnames]
            row += [_fmt(e.attributes.get(n)) for n in enames]
            if has_label:
                row.append(_fmt(t.label))
            if has_tl:
                row.append(_fmt(t.train_label))
            w.writerow(row)
    text = buf.getvalue()
    if dest is not None:
        if hasattr(dest, "write"):
            dest.write(text)
        else:
            with open(dest, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
    return text


def read_log(path) -> EventLog:
    """Dispatch on file extension (.xes / anything else = CSV)."""
    with open(path, "rb") as fh:
        data = fh.read()
    if str(path).lower().endswith(".xes"):
        return parse_xes(data)
    return parse_csv(data)


# --------------------------------------------------------------------------- XES

_XES_TYPES = {"string", "int", "float", "boolean", "date", "id"}


def _local(tag: str) -> str:
    return tag.rsplit("}", 1)[-1]


def _xes_value(el):
    kind = _local(el.tag)
    v = el.get("value")
    if kind == "int":
        return int(v)
    if kind == "float":
        return float(v)
    if kind == "boolean":
        return v.strip().lower() == "true"
    if kind == "date":
        return parse_timestamp(v)
    return v


def _xes_attrs(el) -> dict:
    out = {}
    for child in el:
        if _local(child.tag) in _XES_TYPES and child.get("key") is not None:
            out[child.get("key")] = _xes_value(child)
    return out


def parse_xes(source) -> EventLog:
    """XES core subset reader: log/trace/event with typed attributes."""
    data = source if isinstance(source, (bytes, bytearray)) else (
        source.encode("utf-8") if isinstance(source, str) else source.read())
    try:
        root = ET.fromstring(data)
    except ET.ParseError as exc:
        raise XmlSyntax(exc.position, str(exc))
    traces = []
    for ti, tel in enumerate(el for el in root if _local(el.tag) == "trace"):
        tattrs = _xes_attrs(tel)
        cid = tattrs.pop("concept:name", None)
        if cid is None:
            raise MissingConceptName(f"trace {ti}")
        label = tattrs.pop("label", None)
        events = []
        for ei, eel in enumerate(el for el in tel if _local(el.tag) == "event"):
            ea = _xes_attrs(eel)
            act = ea.pop("concept:name", None)
            if act is None:
                raise MissingConceptName(f"trace {ti} event {ei}")
            ts = ea.pop("time:timestamp", None)
            res = ea.pop("org:resource", None)
            events.append(Event(str(act), ts, None if res is None else str(res), ea))
        if events and all(e.timestamp is not None for e in events):
            events = [e for _, e in sorted(enumerate(events), key=lambda p: (p[1].timestamp, p[0]))]
        if isinstance(label, str):
            label = _parse_label(label)
        traces.append(Trace(str(cid), events, tattrs, label if isinstance(label, bool) else None))
    return EventLog(traces)


# --------------------------------------------------------------------- prefixing

def extract_prefixes(log_: EventLog, n: int) -> EventLog:
    """First `n` events of every trace; shorter traces are dropped."""
    if n < 1:
        raise ValueError("prefix length must be >= 1")
    out = []
    for t in log_:
        if len(t.events) < n:
            continue
        out.append(replace(t, events=list(t.events[:n]), attributes=dict(t.attributes)))
    return EventLog(out)


def quintile_prefix_length(log_: EventLog) -> int:
    """Nearest-rank 20th percentile of trace lengths."""
    lengths = sorted(len(t) for t in log_)
    if not lengths:
        raise TooFewTraces("cannot pick a prefix length for an empty log")
    rank = max(1, math.ceil(0.2 * len(lengths)))
    return max(1, lengths[rank - 1])


# ---------------------------------------------------------------------- splitting

SPLIT_FRACTIONS = (0.48, 0.16, 0.16)


def split_sizes(n: int) -> tuple[int, int, int, int]:
    a, b, c = (math.floor(f * n + 1e-9) for f in SPLIT_FRACTIONS)
    return a, b, c, n - a - b - c


def split_dataset(log_: EventLog, seed: int, noisy_validation: bool = False):
    """Random 48/16/16/20 partition into train/validation/feedback/test.

    The permutation is drawn over case ids in sorted order, so it depends only
    on the set of traces and the seed. Traces carrying a ``train_label`` get it
    as their label in the training part (and in validation if requested).
    """
    n = len(log_)
    if n < 5:
        raise TooFewTraces(f"need at least 5 traces, got {n}")
    ordered = sorted(log_.traces, key=lambda t: t.case_id)
    perm = np.random.default_rng(seed).permutation(n)
    a, b, c, _ = split_sizes(n)
    cuts = [(0, a), (a, a + b), (a + b, a + b + c), (a + b + c, n)]
    parts = []
    for pi, (lo, hi) in enumerate(cuts):
        noisy = pi == 0 or (pi == 1 and noisy_validation)
        chosen = []
        for i in perm[lo:hi]:
            t = ordered[i]
            if noisy and t.train_label is not None:
                t = replace(t, label=t.train_label)
            chosen.append(t)
        parts.append(EventLog(chosen))
    return tuple(parts)
