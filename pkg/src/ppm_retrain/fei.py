"""Frequent Explanation Itemsets: per-quadrant mining, M-score ranking, pair sets."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

from .encoding import EncodedDataset
from .errors import EmptyClass, EmptyDataset, EmptyQuadrant

TP, FP, TN, FN = "TP", "FP", "TN", "FN"
QUADRANTS = (TP, FP, TN, FN)

# ranked-set name -> (FEIs from quadrants, class cl, class not-cl)
RANKINGS = {
    "+": ((TP, FP), (TP, FP), (TN, FN)),
    "-": ((TN, FN), (TN, FN), (TP, FP)),
    TP: ((TP,), (TP,), (FP,)),
    FP: ((FP,), (FP,), (TP,)),
    TN: ((TN,), (TN,), (FN,)),
    FN: ((FN,), (FN,), (TN,)),
}


def _item_key(item):
    feat, val = item
    return (feat, type(val).__name__, str(val))


def items_key(items: Iterable) -> tuple:
    return tuple(sorted((_item_key(i) for i in items)))


def describe(items: Iterable) -> str:
    """Readable conjunction, e.g. ``CType=Gold AND PClaims=No``."""
    parts = [f"{f}={v}" for f, v in sorted(items, key=_item_key)]
    return " AND ".join(parts) if parts else "(empty)"


@dataclass
class ConfusionMatrix:
    quadrants: dict[str, frozenset]
    predicted: dict[str, bool] = field(default_factory=dict)

    def __getitem__(self, q):
        return self.quadrants[q]

    def ids(self, *qs) -> frozenset:
        return frozenset().union(*(self.quadrants[q] for q in qs))

    def counts(self) -> dict[str, int]:
        return {q: len(self.quadrants[q]) for q in QUADRANTS}


def confusion_from_labels(trace_ids: Sequence[str], gold, predicted) -> ConfusionMatrix:
    quads = {q: set() for q in QUADRANTS}
    for tid, g, p in zip(trace_ids, gold, predicted):
        g, p = bool(g), bool(p)
        quads[TP if g and p else FN if g else FP if p else TN].add(tid)
    return ConfusionMatrix({q: frozenset(v) for q, v in quads.items()},
                           {t: bool(p) for t, p in zip(trace_ids, predicted)})


def build_confusion_matrix(model, feedback: EncodedDataset) -> ConfusionMatrix:
    from .classifier import predict
    if len(feedback) == 0:
        raise EmptyDataset("feedback set is empty")
    return confusion_from_labels(feedback.trace_ids, feedback.labels, predict(model, feedback))


@dataclass(frozen=True)
class FEI:
    items: frozenset
    quadrant: str
    support: float

    def __post_init__(self):
        if not self.items:
            raise ValueError("a FEI needs at least one item")

    def __str__(self):
        return describe(self.items)


def _support_ok(count: int, n: int, min_support: float) -> bool:
    return count / n >= min_support


def mine_feis(transactions: Sequence[Iterable], min_support: float = 0.2,
              quadrant: str = "", max_size: int = 4) -> list[FEI]:
    """Apriori over per-trace item sets; all frequent itemsets up to `max_size`.

    Supports are counted on transaction-id bitsets (Python ints).
    Ordered by size, then support (descending), then items.
    """
    txs = [frozenset(t) for t in transactions]
    n = len(txs)
    if n == 0:
        raise EmptyQuadrant(f"quadrant {quadrant or '?'} has no traces")
    tids: dict = {}
    for i, t in enumerate(txs):
        for it in t:
            tids[it] = tids.get(it, 0) | (1 << i)
    level = {frozenset((it,)): bits for it, bits in tids.items()
             if _support_ok(bits.bit_count(), n, min_support)}
    frequent = dict(level)
    size = 1
    while level and size < max_size:
        size += 1
        prev = sorted(level, key=items_key)
        nxt = {}
        for i, a in enumerate(prev):
            for b in prev[i + 1:]:
                u = a | b
                if len(u) != size or u in nxt:
                    continue
                # downward closure: every (size-1)-subset must be frequent
                if not all(u - {x} in level for x in u):
                    continue
                bits = level[a] & level[b]
                if _support_ok(bits.bit_count(), n, min_support):
                    nxt[u] = bits
        level = nxt
        frequent.update(level)
    out = [FEI(s, quadrant, bits.bit_count() / n) for s, bits in frequent.items()]
    out.sort(key=lambda f: (len(f.items), -f.support, items_key(f.items)))
    return out


def item_index(dataset: EncodedDataset) -> dict:
    """(feature, value) -> set of trace ids whose row holds that value."""
    idx: dict = {}
    for j, f in enumerate(dataset.feature_names):
        for tid, v in zip(dataset.trace_ids, dataset.values[:, j]):
            idx.setdefault((f, _key(v)), set()).add(tid)
    return idx


def _key(v):
    # keeps True and 1 apart while letting 1 and 1.0 match
    return ("bool", v) if isinstance(v, bool) else ("val", v)


def satisfying(items: Iterable, dataset: EncodedDataset, ids: Optional[Iterable[str]] = None,
               index: Optional[dict] = None) -> set[str]:
    """Trace ids whose rows hold every (feature, value) pair in `items`."""
    index = item_index(dataset) if index is None else index
    out = None
    for f, v in items:
        hit = index.get((f, _key(v)), set())
        out = set(hit) if out is None else out & hit
        if not out:
            return set()
    out = set(dataset.trace_ids) if out is None else out
    return out if ids is None else out & set(ids)


def m_score(items: Iterable, cl_ids: Iterable[str], not_cl_ids: Iterable[str],
            dataset: EncodedDataset, index: Optional[dict] = None) -> float:
    """|T_cl & T_i| / |T_cl| - |T_notcl & T_i| / |T_notcl|."""
    cl, ncl = set(cl_ids), set(not_cl_ids)
    if not cl or not ncl:
        raise EmptyClass("both classes need at least one trace")
    if cl & ncl:
        raise ValueError("class and complement overlap")
    t_i = satisfying(items, dataset, cl | ncl, index)
    return len(cl & t_i) / len(cl) - len(ncl & t_i) / len(ncl)


@dataclass(frozen=True)
class RankedFEI:
    fei: FEI
    m_score: float
    ranking: str  # "+", "-", "TP", "FP", "TN" or "FN"


def rank_and_select(feis: Mapping[str, Sequence[FEI]], matrix: ConfusionMatrix,
                    dataset: EncodedDataset, k: int = 3):
    """The six M-score rankings, each cut to its top `k`.

    Returns ``(selected, notes)`` where ``notes`` lists rankings that were
    empty because one side of the comparison had no traces.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    selected, notes = {}, []
    index = item_index(dataset)
    for name, (sources, cl_q, ncl_q) in RANKINGS.items():
        pool: dict[tuple, FEI] = {}
        for q in sources:
            for f in feis.get(q, ()):
                key = items_key(f.items)
                if key not in pool or f.support > pool[key].support:
                    pool[key] = f
        cl, ncl = matrix.ids(*cl_q), matrix.ids(*ncl_q)
        if not pool:
            selected[name] = []
            continue
        if not cl or not ncl:
            notes.append(f"ranking {name}: empty class, no FEIs selected")
            selected[name] = []
            continue
        scored = [RankedFEI(f, m_score(f.items, cl, ncl, dataset, index), name) for f in pool.values()]
        scored.sort(key=lambda r: (-r.m_score, -r.fei.support, items_key(r.fei.items)))
        selected[name] = scored[:k]
    return selected, notes


@dataclass(frozen=True)
class FEIPair:
    characterization: frozenset
    to_shuffle: frozenset
    quadrant: str

    def __post_init__(self):
        if not self.to_shuffle <= self.characterization:
            raise ValueError("shuffled items must be part of the characterization")
        if (not self.to_shuffle) != (self.quadrant in (TP, TN)):
            raise ValueError("only wrong-prediction quadrants shuffle features")

    def to_json(self) -> dict:
        return {"quadrant": self.quadrant, "characterization": describe(self.characterization),
                "to_shuffle": describe(self.to_shuffle) if self.to_shuffle else ""}


def build_pairs(selected: Mapping[str, Sequence[RankedFEI]]) -> dict[str, list[FEIPair]]:
    """Cross the class-level top-k FEIs with the quadrant-level ones."""
    out = {}
    for quad, cls in ((TP, "+"), (FP, "+"), (TN, "-"), (FN, "-")):
        pairs, seen = [], set()
        for r1 in selected.get(cls, ()):
            for r2 in selected.get(quad, ()):
                i1, i2 = r1.fei.items, r2.fei.items
                shuffle = i2 if quad in (FP, FN) else frozenset()
                p = FEIPair(i1 | i2, shuffle, quad)
                key = (items_key(p.characterization), items_key(p.to_shuffle))
                if key not in seen:
                    seen.add(key)
                    pairs.append(p)
        out[quad] = pairs
    return out
