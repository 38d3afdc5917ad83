"""Simple-index, complex-index and DECLARE encodings of prefix traces."""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Any, Optional, Sequence

import numpy as np

from . import declare
from .errors import EncodingMismatch, LengthMismatch
from .eventlog import UNKNOWN, EventLog, Trace, infer_schema

ACTIVITY = "activity"
STATIC = "static"
DYNAMIC = "dynamic"
DECLARE = "declare"


def _is_number(v) -> bool:
    return isinstance(v, (int, float, np.integer, np.floating)) and not isinstance(v, (bool, np.bool_))


def _value_key(v):
    """Total order over mixed-type feature values."""
    return (0, float(v), "") if _is_number(v) else (1, 0.0, str(v))


@dataclass(frozen=True)
class FeatureSpec:
    name: str
    kind: str
    admissible_values: tuple
    origin: Any = None  # Constraint, attribute name, or (attribute, position)

    def __post_init__(self):
        if not self.admissible_values:
            raise ValueError(f"feature {self.name!r} has no admissible values")

    @property
    def numeric(self) -> bool:
        """Threshold-splittable: DECLARE counts and all-number attributes."""
        if self.kind == DECLARE:
            return True
        vals = [v for v in self.admissible_values if v != UNKNOWN]
        return bool(vals) and all(_is_number(v) for v in vals)

    def to_json(self) -> dict:
        if isinstance(self.origin, declare.Constraint):
            origin = {"constraint": str(self.origin)}
        elif isinstance(self.origin, tuple):
            origin = {"attribute": self.origin[0], "position": self.origin[1]}
        elif self.origin is None:
            origin = None
        else:
            origin = {"attribute": self.origin}
        return {"name": self.name, "kind": self.kind,
                "admissible_values": list(self.admissible_values), "origin": origin}

    @classmethod
    def from_json(cls, d: dict) -> "FeatureSpec":
        o = d.get("origin")
        if o is None:
            origin = None
        elif "constraint" in o:
            origin = declare.parse_constraint(o["constraint"])
        elif "position" in o:
            origin = (o["attribute"], o["position"])
        else:
            origin = o["attribute"]
        return cls(d["name"], d["kind"], tuple(d["admissible_values"]), origin)


@dataclass
class EncodedDataset:
    features: list[FeatureSpec]
    values: np.ndarray  # object matrix, one row per trace
    labels: np.ndarray  # bool
    trace_ids: list[str]
    encoding: str = ""
    prefix_length: Optional[int] = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=object).reshape(len(self.trace_ids), len(self.features))
        self.labels = np.asarray(self.labels, dtype=bool)
        if not (len(self.values) == len(self.labels) == len(self.trace_ids)):
            raise ValueError("rows, labels and trace ids must have equal length")
        names = [f.name for f in self.features]
        if len(set(names)) != len(names):
            raise ValueError("duplicate feature names")

    def __len__(self):
        return len(self.trace_ids)

    @property
    def feature_names(self) -> list[str]:
        return [f.name for f in self.features]

    def feature_index(self) -> dict[str, int]:
        return {f.name: i for i, f in enumerate(self.features)}

    def row_index(self) -> dict[str, int]:
        return {t: i for i, t in enumerate(self.trace_ids)}

    def row(self, i: int) -> tuple:
        return tuple(self.values[i])

    def copy(self) -> "EncodedDataset":
        return EncodedDataset(list(self.features), self.values.copy(), self.labels.copy(),
                              list(self.trace_ids), self.encoding, self.prefix_length)

    def take(self, rows: Sequence[int]) -> "EncodedDataset":
        rows = list(rows)
        return EncodedDataset(list(self.features), self.values[rows], self.labels[rows],
                              [self.trace_ids[i] for i in rows], self.encoding, self.prefix_length)

    def same_features(self, other: "EncodedDataset") -> bool:
        return [f.name for f in self.features] == [f.name for f in other.features]


# ------------------------------------------------------------------ builders

def _admissible(column) -> tuple:
    vals = set(column)
    return tuple(sorted(vals, key=_value_key)) or (UNKNOWN,)


def _conform(value, spec: FeatureSpec):
    """Map a value onto the training vocabulary of `spec`.

    Unseen categories become "unknown"; numbers pass through for numeric
    features so that thresholds still apply to them.
    """
    if spec.kind == DECLARE:
        return value
    if spec.numeric and _is_number(value):
        return value
    if value in spec.admissible_values:
        return value
    return UNKNOWN


def _labels(log_: EventLog) -> np.ndarray:
    return np.array([bool(t.label) for t in log_], dtype=bool)


def _check_length(log_: EventLog, n: int):
    for t in log_:
        if len(t.events) != n:
            raise LengthMismatch(f"trace {t.case_id!r} has {len(t.events)} events, expected {n}")


def _finish(log_, specs_fresh, columns, encoding, n, features):
    """Either derive specs from the columns, or conform the columns to `features`."""
    if features is None:
        features = [FeatureSpec(name, kind, _admissible(col), origin)
                    for (name, kind, origin), col in zip(specs_fresh, columns)]
        rows = list(zip(*columns)) if columns else [()] * len(log_)
    else:
        if [f.name for f in features] != [s[0] for s in specs_fresh]:
            raise EncodingMismatch("feature layout differs from the reference encoding")
        rows = [tuple(_conform(v, f) for v, f in zip(r, features)) for r in zip(*columns)] \
            if columns else [()] * len(log_)
    values = np.empty((len(log_), len(features)), dtype=object)
    for i, r in enumerate(rows):
        values[i, :] = r
    return EncodedDataset(list(features), values, _labels(log_), [t.case_id for t in log_],
                          encoding, n)


def encode_simple(log_: EventLog, n: int, features: Optional[list[FeatureSpec]] = None) -> EncodedDataset:
    """One categorical feature per position: event_1 ... event_n."""
    _check_length(log_, n)
    layout = [(f"event_{j + 1}", ACTIVITY, ("activity", j + 1)) for j in range(n)]
    columns = [[t.events[j].activity for t in log_] for j in range(n)]
    return _finish(log_, layout, columns, "simple", n, features)


def _attribute_layout(log_: EventLog, features):
    if features is not None:
        statics = [f.origin for f in features if f.kind == STATIC]
        dynamics = list(dict.fromkeys(f.origin[0] for f in features if f.kind == DYNAMIC))
        return statics, dynamics
    schema = infer_schema(log_.traces)
    statics = sorted(k for k, a in schema.items() if a.kind == "trace")
    dynamics = sorted(k for k, a in schema.items() if a.kind == "event")
    return statics, dynamics


def encode_complex(log_: EventLog, n: int, features: Optional[list[FeatureSpec]] = None) -> EncodedDataset:
    """Static attributes, then event_1..event_n, then h_1..h_n per dynamic attribute h."""
    _check_length(log_, n)
    statics, dynamics = _attribute_layout(log_, features)
    layout, columns = [], []
    for s in statics:
        layout.append((s, STATIC, s))
        columns.append([t.attributes.get(s, UNKNOWN) for t in log_])
    for j in range(n):
        layout.append((f"event_{j + 1}", ACTIVITY, ("activity", j + 1)))
        columns.append([t.events[j].activity for t in log_])
    for h in dynamics:
        for j in range(n):
            layout.append((f"{h}_{j + 1}", DYNAMIC, (h, j + 1)))
            columns.append([t.events[j].attributes.get(h, UNKNOWN) for t in log_])
    return _finish(log_, layout, columns, "complex", n, features)


def encode_declare(log_: EventLog, constraints: Sequence[declare.Constraint],
                   features: Optional[list[FeatureSpec]] = None) -> EncodedDataset:
    """One column per constraint holding -1 / 0 / activation count."""
    if features is not None:
        constraints = [f.origin for f in features]
    if not constraints:
        raise ValueError("DECLARE encoding needs at least one constraint")
    seqs = [t.activities for t in log_]
    columns = [[declare.encode(c, s) for s in seqs] for c in constraints]
    if features is None:
        features = [FeatureSpec(str(c), DECLARE, tuple(sorted(set(col) | {-1, 0, 1})), c)
                    for c, col in zip(constraints, columns)]
    values = np.empty((len(log_), len(features)), dtype=object)
    for j, col in enumerate(columns):
        values[:, j] = col
    return EncodedDataset(list(features), values, _labels(log_), [t.case_id for t in log_],
                          "declare", None)


def encode(log_: EventLog, encoding: str, n: Optional[int] = None,
           constraints=None, features=None) -> EncodedDataset:
    if encoding == "simple":
        return encode_simple(log_, n, features)
    if encoding == "complex":
        return encode_complex(log_, n, features)
    if encoding == "declare":
        ds = encode_declare(log_, constraints, features)
        ds.prefix_length = n
        return ds
    raise ValueError(f"unknown encoding {encoding!r}")


def reencode_trace(trace: Trace, features: Sequence[FeatureSpec]) -> tuple:
    """Encode one trace against an existing feature layout."""
    row = []
    for f in features:
        if f.kind == DECLARE:
            row.append(declare.encode(f.origin, trace))
        elif f.kind == ACTIVITY:
            pos = f.origin[1]
            if pos > len(trace.events):
                raise LengthMismatch(f"trace {trace.case_id!r} shorter than position {pos}")
            row.append(_conform(trace.events[pos - 1].activity, f))
        elif f.kind == STATIC:
            row.append(_conform(trace.attributes.get(f.origin, UNKNOWN), f))
        elif f.kind == DYNAMIC:
            attr, pos = f.origin
            if pos > len(trace.events):
                raise LengthMismatch(f"trace {trace.case_id!r} shorter than position {pos}")
            row.append(_conform(trace.events[pos - 1].attributes.get(attr, UNKNOWN), f))
        else:
            raise ValueError(f"unknown feature kind {f.kind!r}")
    return tuple(row)


def widen_admissible(features: Sequence[FeatureSpec], datasets: Sequence[EncodedDataset]) -> list[FeatureSpec]:
    """Recompute DECLARE admissible sets over several datasets sharing a layout."""
    out = []
    for j, f in enumerate(features):
        if f.kind != DECLARE:
            out.append(f)
            continue
        seen = set(f.admissible_values)
        for ds in datasets:
            seen |= set(ds.values[:, j])
        out.append(FeatureSpec(f.name, f.kind, tuple(sorted(seen)), f.origin))
    return out


# ------------------------------------------------------------- serialization

def _cell(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    return str(v)


def to_csv(ds: EncodedDataset, dest=None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["case_id"] + ds.feature_names + ["label"])
    for tid, row, lab in zip(ds.trace_ids, ds.values, ds.labels):
        w.writerow([tid] + [_cell(v) for v in row] + [_cell(bool(lab))])
    text = buf.getvalue()
    if dest is not None:
        with open(dest, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return text


def save_npz(ds: EncodedDataset, path) -> None:
    """Binary cache: per-feature vocabulary codes plus JSON metadata."""
    vocab = []
    codes = np.zeros(ds.values.shape, dtype=np.int32)
    for j in range(len(ds.features)):
        col = ds.values[:, j]
        voc = sorted(set(col), key=_value_key)
        lookup = {v: i for i, v in enumerate(voc)}
        codes[:, j] = [lookup[v] for v in col]
        vocab.append(voc)
    meta = {
        "features": [f.to_json() for f in ds.features],
        "vocab": vocab,
        "trace_ids": ds.trace_ids,
        "encoding": ds.encoding,
        "prefix_length": ds.prefix_length,
    }
    np.savez_compressed(path, codes=codes, labels=ds.labels,
                        meta=np.frombuffer(json.dumps(meta).encode("utf-8"), dtype=np.uint8))


def load_npz(path) -> EncodedDataset:
    with np.load(path, allow_pickle=False) as z:
        meta = json.loads(z["meta"].tobytes().decode("utf-8"))
        codes = z["codes"]
        labels = z["labels"]
    features = [FeatureSpec.from_json(d) for d in meta["features"]]
    values = np.empty(codes.shape, dtype=object)
    for j, voc in enumerate(meta["vocab"]):
        values[:, j] = [voc[c] for c in codes[:, j]] if len(codes) else []
    return EncodedDataset(features, values, labels, meta["trace_ids"],
                          meta["encoding"], meta["prefix_length"])
