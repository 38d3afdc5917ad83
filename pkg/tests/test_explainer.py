import itertools
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ppm_retrain.classifier import LEAF, ForestModel, Hyperparams, Tree, predict_proba_matrix, train
from ppm_retrain.encoding import ACTIVITY, DECLARE, EncodedDataset, FeatureSpec
from ppm_retrain.errors import EmptyBackground, FeatureMismatch
from ppm_retrain.explainer import (Explanation, ExplanationItem, explain, explain_dataset,
                                   shapley_matrix, top_items, write_jsonl)


def dataset(rows, labels, kinds):
    m = len(kinds)
    feats = [FeatureSpec(f"f{j}", kinds[j], tuple(sorted({r[j] for r in rows}, key=str))) for j in range(m)]
    return EncodedDataset(feats, np.array(rows, dtype=object), labels, [f"t{i:03d}" for i in range(len(rows))])


def random_problem(seed, m=6, n=40):
    rng = np.random.default_rng(seed)
    kinds = [ACTIVITY if j % 2 else DECLARE for j in range(m)]
    rows = [tuple(str(rng.integers(3)) if k == ACTIVITY else int(rng.integers(-1, 3)) for k in kinds)
            for _ in range(n)]
    labels = [bool(rng.random() < 0.5) ^ (r[0] > 0) for r in rows]
    return dataset(rows, labels, kinds)


def brute_force(model, x, background):
    """Shapley values straight from the permutation-weighted formula."""
    m = len(x)
    Z = model.codec.matrix(background.values)
    xx = model.codec.matrix(np.array([x], dtype=object))[0]

    def v(S):
        H = Z.copy()
        H[:, list(S)] = xx[list(S)]
        return predict_proba_matrix(model, H).mean()

    phi = np.zeros(m)
    for i in range(m):
        rest = [j for j in range(m) if j != i]
        for k in range(m):
            w = math.factorial(k) * math.factorial(m - k - 1) / math.factorial(m)
            for S in itertools.combinations(rest, k):
                phi[i] += w * (v(S + (i,)) - v(S))
    return phi


@pytest.mark.parametrize("seed", range(4))
def test_matches_brute_force_shapley(seed):
    ds = random_problem(seed)
    model = train(ds, Hyperparams(n_trees=6, max_depth=5, min_leaf=1, features_per_split=0.7), seed)
    bg = EncodedDataset(ds.features, ds.values[:12], ds.labels[:12], ds.trace_ids[:12])
    exps = explain_dataset(model, ds, bg)
    for i in range(0, len(ds), 7):
        got = np.array([it.score for it in exps[i].items])
        want = brute_force(model, ds.values[i], bg)
        assert np.max(np.abs(got - want)) <= 1e-9


def test_local_accuracy_and_base_value():
    ds = random_problem(9)
    model = train(ds, Hyperparams(n_trees=15, max_depth=6), 1)
    for e in explain_dataset(model, ds):
        assert abs(e.base_value + sum(it.score for it in e.items) - e.probability) <= 1e-9


def leaf(p):
    return Tree(*(np.array([x]) for x in (-1, -1, -1, LEAF, 0.0, p, 1.0)))


SPECS = [FeatureSpec("a", DECLARE, (-1, 0, 1)), FeatureSpec("b", DECLARE, (-1, 0, 1))]


def test_constant_model_scores_zero():
    model = ForestModel([leaf(0.3)], Hyperparams(n_trees=1), SPECS, 0)
    bg = EncodedDataset(SPECS, np.array([[0, 1], [1, -1]], dtype=object), [True, False], ["x", "y"])
    e = explain(model, (1, 1), bg)
    assert [it.score for it in e.items] == [0.0, 0.0]
    assert e.base_value == pytest.approx(0.3)


def test_depth_one_tree_credits_split_feature_only():
    from ppm_retrain.classifier import LE
    t = Tree(left=np.array([1, -1, -1]), right=np.array([2, -1, -1]), feature=np.array([0, -1, -1]),
             kind=np.array([LE, LEAF, LEAF]), value=np.array([0.5, 0.0, 0.0]),
             prob=np.array([0.5, 0.0, 1.0]), samples=np.array([2.0, 1.0, 1.0]))
    model = ForestModel([t], Hyperparams(n_trees=1), SPECS, 0)
    bg = EncodedDataset(SPECS, np.array([[0, 0], [1, 0]], dtype=object), [False, True], ["x", "y"])
    e = explain(model, (1, -1), bg)
    # f(x) = 1, base = 0.5: feature a carries the whole difference
    assert e.items[0].score == pytest.approx(0.5) and e.items[1].score == 0.0


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10_000))
def test_unused_feature_scores_zero(seed):
    rng = np.random.default_rng(seed)
    rows = [(int(rng.integers(-1, 3)), int(rng.integers(-1, 3))) for _ in range(30)]
    ds = dataset(rows, [a > 0 for a, _ in rows], [DECLARE] * 2)
    model = train(ds, Hyperparams(n_trees=4, max_depth=3, features_per_split=1.0), seed)
    X = model.codec.matrix(ds.values)
    phi, _ = shapley_matrix(model, X, X)
    used = {int(f) for t in model.trees for f, k in zip(t.feature, t.kind) if k != LEAF}
    for j in range(2):
        if j not in used:
            assert np.all(phi[:, j] == 0)


def test_symmetric_features_get_equal_shares():
    from ppm_retrain.classifier import LE
    # f = 1 iff a > 0 and b > 0, built as a two-level tree
    t = Tree(left=np.array([1, -1, 3, -1, -1]), right=np.array([2, -1, 4, -1, -1]),
             feature=np.array([0, -1, 1, -1, -1]), kind=np.array([LE, LEAF, LE, LEAF, LEAF]),
             value=np.array([0.5, 0, 0.5, 0, 0]), prob=np.array([0, 0, 0, 0, 1.0]),
             samples=np.ones(5))
    model = ForestModel([t], Hyperparams(n_trees=1), SPECS, 0)
    bg = EncodedDataset(SPECS, np.array([[0, 0]], dtype=object), [False], ["z"])
    e = explain(model, (1, 1), bg)
    assert e.items[0].score == pytest.approx(0.5) and e.items[1].score == pytest.approx(0.5)


def test_errors():
    model = ForestModel([leaf(0.3)], Hyperparams(n_trees=1), SPECS, 0)
    empty = EncodedDataset(SPECS, np.empty((0, 2), dtype=object), [], [])
    with pytest.raises(EmptyBackground):
        explain(model, (1, 1), empty)
    with pytest.raises(FeatureMismatch):
        explain(model, (1,), empty)


def test_top_items_by_absolute_score():
    e = Explanation("t", True, 0.9, 0.5, [ExplanationItem("f1", "x", 0.5), ExplanationItem("f2", "y", -0.6),
                                          ExplanationItem("f3", "z", 0.1)])
    assert [it.feature for it in top_items(e, 2)] == ["f2", "f1"]
    assert [it.feature for it in top_items(e, 2, signed=True)] == ["f1", "f3"]
    assert len(top_items(e, 10)) == 3
    with pytest.raises(ValueError):
        top_items(e, 0)


def test_jsonl_output(tmp_path):
    e = Explanation("t", False, 0.2, 0.4, [ExplanationItem("f", np.int64(3), -0.2)])
    write_jsonl([e, e], tmp_path / "e.jsonl")
    lines = (tmp_path / "e.jsonl").read_text().splitlines()
    assert len(lines) == 2
    assert json.loads(lines[0]) == {"trace_id": "t", "predicted_label": False, "probability": 0.2,
                                    "base_value": 0.4, "items": [["f", 3, -0.2]]}
