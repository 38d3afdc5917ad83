"""Protect correctly-learned traces, shuffle wrong-correlation features, retrain."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Mapping, Optional, Sequence

import numpy as np

from . import declare
from .encoding import DECLARE, EncodedDataset, _value_key, reencode_trace
from .errors import EncodingMismatch, ProtectedViolation, Unalignable
from .eventlog import UNKNOWN, EventLog
from .fei import FN, FP, TN, TP, FEIPair, item_index, satisfying

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ShuffleAction:
    trace_id: str
    feature: str
    old: object
    new: object


@dataclass
class ShufflePlan:
    protected_ids: frozenset
    actions: list[ShuffleAction]
    rng_seed: int
    # filled in by the DECLARE applier: actions that changed target or were dropped
    skipped: list[dict] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "rng_seed": self.rng_seed,
            "protected_ids": sorted(self.protected_ids),
            "actions": [{"trace_id": a.trace_id, "feature": a.feature,
                         "old": _plain(a.old), "new": _plain(a.new)} for a in self.actions],
            "skipped": self.skipped,
        }


def _plain(v):
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.floating):
        return float(v)
    return v


def _candidates(spec, old) -> list:
    pool = [v for v in spec.admissible_values if v != UNKNOWN and not _eq(v, old)]
    return sorted(pool, key=_value_key)


def _eq(a, b) -> bool:
    return type(a) is type(b) and a == b if isinstance(a, bool) or isinstance(b, bool) else a == b


def plan_shuffle(dataset: EncodedDataset, pairs: Mapping[str, Sequence[FEIPair]],
                 seed: int) -> ShufflePlan:
    """Decide which cells change and to what; pure and deterministic in `seed`.

    A trace is protected when it satisfies any TP/TN characterization. Each
    unprotected trace matching the characterization of an FP/FN pair gets
    one action per item to shuffle. Matching always looks at the original
    rows, and a cell is changed at most once.
    """
    names = set(dataset.feature_names)
    for quad in (TP, FP, TN, FN):
        for p in pairs.get(quad, ()):
            missing = [f for f, _ in p.characterization if f not in names]
            if missing:
                raise EncodingMismatch(f"pair mentions unknown features {missing}")
    index = item_index(dataset)
    protected = set()
    for quad in (TP, TN):
        for p in pairs.get(quad, ()):
            protected |= satisfying(p.characterization, dataset, index=index)
    rng = np.random.default_rng(seed)
    specs = {f.name: f for f in dataset.features}
    col = dataset.feature_index()
    order = {t: i for i, t in enumerate(dataset.trace_ids)}
    actions, touched = [], set()
    for quad in (FP, FN):
        for p in pairs.get(quad, ()):
            hits = sorted(satisfying(p.characterization, dataset, index=index) - protected, key=order.__getitem__)
            for tid in hits:
                for feat, _ in sorted(p.to_shuffle, key=lambda it: col[it[0]]):
                    if (tid, feat) in touched:
                        continue
                    old = dataset.values[order[tid], col[feat]]
                    pool = _candidates(specs[feat], old)
                    if not pool:
                        continue
                    touched.add((tid, feat))
                    actions.append(ShuffleAction(tid, feat, old, pool[int(rng.integers(len(pool)))]))
    return ShufflePlan(frozenset(protected), actions, seed)


def _check_protected(plan: ShufflePlan):
    bad = [a.trace_id for a in plan.actions if a.trace_id in plan.protected_ids]
    if bad:
        raise ProtectedViolation(f"actions target protected traces {sorted(set(bad))[:5]}")


def apply_shuffle_index(dataset: EncodedDataset, plan: ShufflePlan) -> EncodedDataset:
    """Copy of `dataset` with the planned cells replaced."""
    if dataset.encoding == DECLARE:
        raise EncodingMismatch("use apply_shuffle_declare for DECLARE datasets")
    _check_protected(plan)
    out = dataset.copy()
    rows, col = out.row_index(), out.feature_index()
    for a in plan.actions:
        out.values[rows[a.trace_id], col[a.feature]] = a.new
    for tid in plan.protected_ids:
        if tid in rows and not all(_eq(x, y) for x, y in
                                   zip(out.values[rows[tid]], dataset.values[rows[tid]])):
            raise ProtectedViolation(f"protected trace {tid!r} changed")
    return out


def apply_shuffle_declare(log_: EventLog, dataset: EncodedDataset, plan: ShufflePlan,
                          edit_budget: int = 3):
    """Align each affected trace to its new constraint values and re-encode it.

    Actions on one trace run in feature order against the trace as edited so
    far. If a target is unreachable within `edit_budget` edits, one other
    value is drawn from the remaining pool; if that fails too the action is
    dropped. ``plan.actions`` is rewritten to the values actually applied and
    ``plan.skipped`` records every redraw and drop.

    Returns ``(edited log, re-encoded dataset)``.
    """
    if dataset.encoding != DECLARE:
        raise EncodingMismatch("apply_shuffle_declare needs a DECLARE dataset")
    if edit_budget < 1:
        raise ValueError("edit budget must be positive")
    _check_protected(plan)
    specs = {f.name: f for f in dataset.features}
    col = dataset.feature_index()
    by_trace: dict[str, list[ShuffleAction]] = {}
    for a in plan.actions:
        by_trace.setdefault(a.trace_id, []).append(a)
    # redraw stream kept apart from the planning stream
    rng = np.random.default_rng([plan.rng_seed, 1])
    traces = log_.by_id()
    out = dataset.copy()
    rows = out.row_index()
    applied, skipped = [], []
    for tid in dataset.trace_ids:
        acts = by_trace.get(tid)
        if not acts:
            continue
        if tid not in traces:
            raise EncodingMismatch(f"trace {tid!r} is not in the event log")
        trace = traces[tid]
        for a in sorted(acts, key=lambda a: col[a.feature]):
            constraint = specs[a.feature].origin
            target, result = a.new, None
            try:
                result = declare.align(trace, constraint, target, edit_budget)
            except Unalignable:
                pool = [v for v in _candidates(specs[a.feature], a.old) if not _eq(v, target)]
                if pool:
                    retry = pool[int(rng.integers(len(pool)))]
                    skipped.append({"trace_id": tid, "feature": a.feature, "target": _plain(target),
                                    "outcome": f"redrawn as {_plain(retry)}"})
                    try:
                        result, target = declare.align(trace, constraint, retry, edit_budget), retry
                    except Unalignable:
                        result = None
            if result is None:
                skipped.append({"trace_id": tid, "feature": a.feature, "target": _plain(target),
                                "outcome": "skipped"})
                log.info("unalignable: %s %s -> %s", tid, a.feature, target)
                continue
            trace = result
            applied.append(replace(a, new=target))
        traces[tid] = trace
        out.values[rows[tid], :] = reencode_trace(trace, dataset.features)
    plan.actions = applied
    plan.skipped = skipped
    edited = EventLog([traces[t.case_id] for t in log_])
    return edited, out


def apply_shuffle(dataset: EncodedDataset, plan: ShufflePlan, log_: Optional[EventLog] = None,
                  edit_budget: int = 3):
    """Dispatch on the encoding; returns ``(log or None, dataset)``."""
    if dataset.encoding == DECLARE:
        if log_ is None:
            raise EncodingMismatch("DECLARE shuffling needs the event log")
        return apply_shuffle_declare(log_, dataset, plan, edit_budget)
    return log_, apply_shuffle_index(dataset, plan)


def retrain(train_shuffled: EncodedDataset, validation_shuffled: EncodedDataset,
            trials: int = 50, seed: int = 0):
    """Same random search as the baseline, on the shuffled data."""
    from .classifier import optimize
    return optimize(train_shuffled, validation_shuffled, trials, seed)


def summarize(plan: ShufflePlan) -> str:
    feats = sorted({a.feature for a in plan.actions})
    return (f"{len(plan.actions)} cells in {len({a.trace_id for a in plan.actions})} traces "
            f"({', '.join(feats) or 'none'}); {len(plan.protected_ids)} protected")

