"""Exact interventional Shapley values for forest predictions.

For one explained row ``x`` and one background row ``z`` the value function
is ``v(S) = f(x_S, z_rest)``. In a single tree, a leaf is reached for exactly
the coalitions that contain every feature on which the path follows ``x``
while ``z`` would go elsewhere (set A) and none of the features where the
path follows ``z`` instead (set B). Such an indicator game has closed-form
Shapley values, so one depth-first walk per (x, z, tree) is enough:

    i in A:  +v * (|A|-1)! |B|! / (|A|+|B|)!
    i in B:  -v * |A|! (|B|-1)! / (|A|+|B|)!

Scores are averaged over trees and background rows.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numba
import numpy as np

from .classifier import ForestModel, predict_proba_matrix
from .encoding import EncodedDataset
from .errors import EmptyBackground, FeatureMismatch

LOCAL_ACCURACY_TOL = 1e-9


@dataclass(frozen=True)
class ExplanationItem:
    feature: str
    value: object
    score: float

    @property
    def pair(self) -> tuple:
        return (self.feature, self.value)


@dataclass
class Explanation:
    trace_id: str
    predicted_label: bool
    probability: float
    base_value: float
    items: list[ExplanationItem]

    def to_json(self) -> dict:
        return {
            "trace_id": self.trace_id,
            "predicted_label": self.predicted_label,
            "probability": self.probability,
            "base_value": self.base_value,
            "items": [[it.feature, _jsonable(it.value), it.score] for it in self.items],
        }


def _jsonable(v):
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    return v


def _weight_table(size: int) -> np.ndarray:
    w = np.zeros((size + 1, size + 1))
    for a in range(size + 1):
        for b in range(size + 1 - a):
            w[a, b] = math.factorial(a) * math.factorial(b) / math.factorial(a + b + 1)
    return w


@numba.njit(cache=True)
def _goes_left(kind, thr, x):
    if kind == 1:
        return x == thr
    return x <= thr


@numba.njit(cache=True)
def _shap_pair(x, z, root, left, right, feature, kind, value, prob, W, phi, scale,
               stack_node, stack_na, stack_nb, stack_adda, stack_addb, path_a, path_b):
    sp = 0
    stack_node[0] = root
    stack_na[0] = 0
    stack_nb[0] = 0
    stack_adda[0] = -1
    stack_addb[0] = -1
    sp = 1
    while sp > 0:
        sp -= 1
        node = stack_node[sp]
        na = stack_na[sp]
        nb = stack_nb[sp]
        if stack_adda[sp] >= 0:
            path_a[na - 1] = stack_adda[sp]
        if stack_addb[sp] >= 0:
            path_b[nb - 1] = stack_addb[sp]
        if kind[node] == 0:
            v = prob[node] * scale
            if v != 0.0:
                if na > 0:
                    w = W[na - 1, nb] * v
                    for k in range(na):
                        phi[path_a[k]] += w
                if nb > 0:
                    w = W[na, nb - 1] * v
                    for k in range(nb):
                        phi[path_b[k]] -= w
            continue
        f = feature[node]
        xl = _goes_left(kind[node], value[node], x[f])
        zl = _goes_left(kind[node], value[node], z[f])
        xc = left[node] if xl else right[node]
        zc = left[node] if zl else right[node]
        if xl == zl:
            stack_node[sp] = xc
            stack_na[sp] = na
            stack_nb[sp] = nb
            stack_adda[sp] = -1
            stack_addb[sp] = -1
            sp += 1
            continue
        in_a = False
        for k in range(na):
            if path_a[k] == f:
                in_a = True
                break
        if in_a:
            stack_node[sp] = xc
            stack_na[sp] = na
            stack_nb[sp] = nb
            stack_adda[sp] = -1
            stack_addb[sp] = -1
            sp += 1
            continue
        in_b = False
        for k in range(nb):
            if path_b[k] == f:
                in_b = True
                break
        if in_b:
            stack_node[sp] = zc
            stack_na[sp] = na
            stack_nb[sp] = nb
            stack_adda[sp] = -1
            stack_addb[sp] = -1
            sp += 1
            continue
        # z branch first so that the x branch is walked first (LIFO)
        stack_node[sp] = zc
        stack_na[sp] = na
        stack_nb[sp] = nb + 1
        stack_adda[sp] = -1
        stack_addb[sp] = f
        sp += 1
        stack_node[sp] = xc
        stack_na[sp] = na + 1
        stack_nb[sp] = nb
        stack_adda[sp] = f
        stack_addb[sp] = -1
        sp += 1


@numba.njit(cache=True)
def _shap_rows(Xq, Z, zw, roots, left, right, feature, kind, value, prob, W, max_stack):
    nq, m = Xq.shape
    phi = np.zeros((nq, m))
    ntrees = roots.shape[0]
    stack_node = np.empty(max_stack, np.int64)
    stack_na = np.empty(max_stack, np.int64)
    stack_nb = np.empty(max_stack, np.int64)
    stack_adda = np.empty(max_stack, np.int64)
    stack_addb = np.empty(max_stack, np.int64)
    path_a = np.empty(m + 1, np.int64)
    path_b = np.empty(m + 1, np.int64)
    for q in range(nq):
        for r in range(Z.shape[0]):
            same = True
            for j in range(m):
                if Xq[q, j] != Z[r, j]:
                    same = False
                    break
            if same:
                continue
            scale = zw[r] / ntrees
            for t in range(ntrees):
                _shap_pair(Xq[q], Z[r], roots[t], left, right, feature, kind, value, prob, W,
                           phi[q], scale, stack_node, stack_na, stack_nb, stack_adda,
                           stack_addb, path_a, path_b)
    return phi


def _unique_rows(X: np.ndarray):
    uniq, inverse, counts = np.unique(X, axis=0, return_inverse=True, return_counts=True)
    return uniq, inverse.reshape(-1), counts


def shapley_matrix(model: ForestModel, X: np.ndarray, background: np.ndarray):
    """Shapley values for every row of ``X``; returns ``(phi, base_value)``."""
    if background.shape[0] == 0:
        raise EmptyBackground("background set is empty")
    if X.shape[1] != model.n_features or background.shape[1] != model.n_features:
        raise FeatureMismatch("rows do not match the model features")
    roots, left, right, feature, kind, value, prob = model.packed()
    depth = max(t.depth() for t in model.trees)
    W = _weight_table(depth + 1)
    zu, _, zc = _unique_rows(np.ascontiguousarray(background, dtype=np.float64))
    zw = zc / zc.sum()
    xu, inv, _ = _unique_rows(np.ascontiguousarray(X, dtype=np.float64))
    max_stack = 2 * (depth + 2) + 4
    phi_u = _shap_rows(xu, zu, zw, roots, left, right, feature, kind, value, prob, W, max_stack)
    base = float(np.dot(zw, predict_proba_matrix(model, zu)))
    return phi_u[inv], base


def explain_dataset(model: ForestModel, data: EncodedDataset,
                    background: Optional[EncodedDataset] = None) -> list[Explanation]:
    """Explain every row of `data` against `background` (default: `data` itself)."""
    background = data if background is None else background
    for ds in (data, background):
        if ds.feature_names != [f.name for f in model.feature_specs]:
            raise FeatureMismatch("dataset features differ from the model's")
    if len(background) == 0:
        raise EmptyBackground("background set is empty")
    X = model.codec.matrix(data.values)
    Z = model.codec.matrix(background.values)
    phi, base = shapley_matrix(model, X, Z)
    proba = predict_proba_matrix(model, X)
    names = data.feature_names
    out = []
    for i, tid in enumerate(data.trace_ids):
        gap = abs(base + phi[i].sum() - proba[i])
        if gap > LOCAL_ACCURACY_TOL:
            raise ArithmeticError(f"local accuracy violated for {tid!r}: gap {gap:.3e}")
        items = [ExplanationItem(n, data.values[i, j], float(phi[i, j])) for j, n in enumerate(names)]
        out.append(Explanation(tid, bool(proba[i] >= 0.5), float(proba[i]), base, items))
    return out


def explain(model: ForestModel, row: Sequence, background: EncodedDataset,
            trace_id: str = "") -> Explanation:
    """Single-row convenience wrapper around `explain_dataset`."""
    if len(row) != model.n_features:
        raise FeatureMismatch(f"expected {model.n_features} values, got {len(row)}")
    single = EncodedDataset(list(model.feature_specs), np.asarray([list(row)], dtype=object),
                            [False], [trace_id or "row"])
    return explain_dataset(model, single, background)[0]


def top_items(explanation: Explanation, t: int = 10, signed: bool = False) -> list[ExplanationItem]:
    """The `t` most impactful items.

    Default ranking is by absolute score. With ``signed`` the ranking is by the
    push towards the predicted label (score for positive predictions, minus
    score for negative ones). Ties go to the feature name.
    """
    if t < 1:
        raise ValueError("t must be >= 1")
    if signed:
        sign = 1.0 if explanation.predicted_label else -1.0
        key = lambda it: (-sign * it.score, it.feature)
    else:
        key = lambda it: (-abs(it.score), it.feature)
    return sorted(explanation.items, key=key)[:t]


def write_jsonl(explanations: Sequence[Explanation], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for e in explanations:
            fh.write(json.dumps(e.to_json()) + "\n")
