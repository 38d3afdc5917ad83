"""Random-forest outcome classifier over categorical and numeric features.

Split search is delegated to scikit-learn's CART on a one-hot design matrix;
each fitted tree is then converted to explicit nodes over the *original*
features (``x[f] == category`` or ``x[f] <= threshold``). Prediction and the
Shapley explainer only ever see the converted trees.
"""
from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numba
import numpy as np
from sklearn.ensemble import RandomForestClassifier

from .encoding import EncodedDataset, FeatureSpec
from .errors import EmptyDataset, FeatureMismatch
from .metrics import macro_f1
from .eventlog import UNKNOWN

log = logging.getLogger(__name__)

MODEL_FORMAT_VERSION = 1
LEAF, EQ, LE = 0, 1, 2
MISSING_NUMBER = -1.0e30

SEARCH_SPACE = {
    "n_trees": (50, 100, 200, 300),
    "max_depth": (4, 6, 8, 12, 16),
    "min_leaf": (1, 2, 5, 10),
    "features_per_split": (0.3, 0.5, 0.7, 1.0),
}


@dataclass(frozen=True)
class Hyperparams:
    n_trees: int = 100
    max_depth: int = 8
    min_leaf: int = 1
    features_per_split: float = 0.5

    def __post_init__(self):
        if min(self.n_trees, self.max_depth, self.min_leaf) < 1:
            raise ValueError("hyperparameters must be positive")
        if not 0 < self.features_per_split <= 1:
            raise ValueError("features_per_split must lie in (0, 1]")


@dataclass
class Tree:
    """Flat node arrays; ``left`` is taken when the node predicate holds."""
    left: np.ndarray
    right: np.ndarray
    feature: np.ndarray
    kind: np.ndarray
    value: np.ndarray
    prob: np.ndarray
    samples: np.ndarray

    def __len__(self):
        return len(self.kind)

    def depth(self) -> int:
        best, stack = 0, [(0, 0)]
        while stack:
            node, d = stack.pop()
            best = max(best, d)
            if self.kind[node] != LEAF:
                stack += [(self.left[node], d + 1), (self.right[node], d + 1)]
        return best


class Codec:
    """Numeric view of feature values: category codes or float values."""

    def __init__(self, features: Sequence[FeatureSpec]):
        self.features = list(features)
        self.numeric = [f.numeric for f in self.features]
        self.vocab: list[list] = []
        self.lookup: list[dict] = []
        for f, num in zip(self.features, self.numeric):
            voc = [] if num else list(f.admissible_values)
            if not num and UNKNOWN not in voc:
                voc.append(UNKNOWN)
            self.vocab.append(voc)
            self.lookup.append({v: i for i, v in enumerate(voc)})

    def code(self, j: int, v) -> float:
        if self.numeric[j]:
            if isinstance(v, str) or v is None:
                return MISSING_NUMBER
            return float(np.float32(v))
        lk = self.lookup[j]
        return float(lk.get(v, lk[UNKNOWN]))

    def matrix(self, values: np.ndarray) -> np.ndarray:
        values = np.asarray(values, dtype=object)
        if values.ndim == 1:
            values = values.reshape(1, -1)
        if values.shape[1] != len(self.features):
            raise FeatureMismatch(f"expected {len(self.features)} features, got {values.shape[1]}")
        X = np.empty(values.shape, dtype=np.float64)
        for j in range(values.shape[1]):
            X[:, j] = [self.code(j, v) for v in values[:, j]]
        return X

    def decode(self, j: int, x: float):
        if self.numeric[j]:
            return x
        return self.vocab[j][int(x)]


@dataclass
class ForestModel:
    trees: list[Tree]
    hyperparams: Hyperparams
    feature_specs: list[FeatureSpec]
    training_seed: int
    _packed: Optional[tuple] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if not self.trees:
            raise ValueError("a forest needs at least one tree")
        m = len(self.feature_specs)
        for t in self.trees:
            inner = t.kind != LEAF
            if inner.any() and (t.feature[inner].min() < 0 or t.feature[inner].max() >= m):
                raise ValueError("tree split index out of range")
        self.codec = Codec(self.feature_specs)

    @property
    def n_features(self) -> int:
        return len(self.feature_specs)

    def packed(self):
        """All trees concatenated, with child indices made global."""
        if self._packed is None:
            offsets = np.cumsum([0] + [len(t) for t in self.trees])
            left = np.concatenate([np.where(t.kind != LEAF, t.left + o, -1) for t, o in zip(self.trees, offsets)])
            right = np.concatenate([np.where(t.kind != LEAF, t.right + o, -1) for t, o in zip(self.trees, offsets)])
            self._packed = (
                np.ascontiguousarray(offsets[:-1], dtype=np.int64),
                left.astype(np.int64), right.astype(np.int64),
                np.concatenate([t.feature for t in self.trees]).astype(np.int64),
                np.concatenate([t.kind for t in self.trees]).astype(np.int64),
                np.concatenate([t.value for t in self.trees]).astype(np.float64),
                np.concatenate([t.prob for t in self.trees]).astype(np.float64),
            )
        return self._packed

    def structurally_equal(self, other: "ForestModel") -> bool:
        if len(self.trees) != len(other.trees) or self.hyperparams != other.hyperparams:
            return False
        for a, b in zip(self.trees, other.trees):
            for name in ("left", "right", "feature", "kind", "value", "prob"):
                if not np.array_equal(getattr(a, name), getattr(b, name)):
                    return False
        return True


# ------------------------------------------------------------------ training

def _one_hot(X: np.ndarray, codec: Codec):
    """Design matrix for CART plus the map column -> (feature, code or None)."""
    cols, colmap = [], []
    for j in range(X.shape[1]):
        if codec.numeric[j]:
            cols.append(X[:, j])
            colmap.append((j, None))
        else:
            for c in np.unique(X[:, j]):
                cols.append((X[:, j] == c).astype(np.float64))
                colmap.append((j, float(c)))
    if not cols:
        return np.zeros((X.shape[0], 1)), [(-1, None)]
    return np.column_stack(cols), colmap


def _convert(est, colmap, positive_index: Optional[int]) -> Tree:
    t = est.tree_
    n = t.node_count
    left = np.full(n, -1, dtype=np.int64)
    right = np.full(n, -1, dtype=np.int64)
    feature = np.full(n, -1, dtype=np.int64)
    kind = np.zeros(n, dtype=np.int64)
    value = np.zeros(n, dtype=np.float64)
    prob = np.zeros(n, dtype=np.float64)
    samples = t.weighted_n_node_samples.astype(np.float64)
    for node in range(n):
        counts = t.value[node][0]
        total = counts.sum()
        if positive_index is None:
            prob[node] = 0.0
        else:
            prob[node] = counts[positive_index] / total if total > 0 else 0.0
        if t.children_left[node] == -1:
            continue
        j, code = colmap[t.feature[node]]
        feature[node] = j
        if code is None:
            kind[node] = LE
            value[node] = t.threshold[node]
            left[node], right[node] = t.children_left[node], t.children_right[node]
        else:
            # one-hot column > 0.5 means x[j] == code: that is CART's right child
            kind[node] = EQ
            value[node] = code
            left[node], right[node] = t.children_right[node], t.children_left[node]
    return Tree(left, right, feature, kind, value, prob, samples)


def train(dataset: EncodedDataset, hp: Hyperparams, seed: int) -> ForestModel:
    """Bootstrap-sampled Gini forest; deterministic in (dataset, hp, seed)."""
    if len(dataset) == 0:
        raise EmptyDataset("cannot train on an empty dataset")
    order = sorted(range(len(dataset)), key=lambda i: dataset.trace_ids[i])
    codec = Codec(dataset.features)
    X = codec.matrix(dataset.values[order])
    y = dataset.labels[order].astype(int)
    design, colmap = _one_hot(X, codec)
    rf = RandomForestClassifier(
        n_estimators=hp.n_trees, max_depth=hp.max_depth, min_samples_leaf=hp.min_leaf,
        max_features=hp.features_per_split, bootstrap=True, criterion="gini",
        random_state=np.random.RandomState(seed % (2**32)), n_jobs=1)
    rf.fit(design, y)
    classes = list(rf.classes_)
    if 1 in classes:
        pos = classes.index(1)
        trees = [_convert(est, colmap, pos) for est in rf.estimators_]
    else:
        trees = [_convert(est, colmap, None) for est in rf.estimators_]
    if len(classes) == 1:
        # single-label data: every leaf predicts that label with certainty
        p = 1.0 if classes[0] == 1 else 0.0
        for t in trees:
            t.prob[:] = p
    return ForestModel(trees, hp, list(dataset.features), seed)


# ---------------------------------------------------------------- prediction

@numba.njit(cache=True)
def _predict_packed(X, roots, left, right, feature, kind, value, prob):
    n = X.shape[0]
    out = np.zeros(n)
    for i in range(n):
        acc = 0.0
        for r in range(roots.shape[0]):
            node = roots[r]
            while kind[node] != 0:
                x = X[i, feature[node]]
                if kind[node] == 1:
                    go_left = x == value[node]
                else:
                    go_left = x <= value[node]
                node = left[node] if go_left else right[node]
            acc += prob[node]
        out[i] = acc / roots.shape[0]
    return out


def predict_proba_matrix(model: ForestModel, X: np.ndarray) -> np.ndarray:
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise FeatureMismatch("matrix does not match the model features")
    return _predict_packed(X, *model.packed())


def _rows(model: ForestModel, data) -> np.ndarray:
    if isinstance(data, EncodedDataset):
        if [f.name for f in data.features] != [f.name for f in model.feature_specs]:
            raise FeatureMismatch("dataset features differ from the model's")
        return model.codec.matrix(data.values)
    return model.codec.matrix(np.asarray(list(data), dtype=object).reshape(1, -1))


def predict_proba(model: ForestModel, data):
    """Positive-class probability for one row (scalar) or a dataset (array)."""
    p = predict_proba_matrix(model, _rows(model, data))
    return p if isinstance(data, EncodedDataset) else float(p[0])


def predict(model: ForestModel, data):
    """Positive iff probability >= 0.5."""
    p = predict_proba(model, data)
    return p >= 0.5 if isinstance(data, EncodedDataset) else bool(p >= 0.5)


# -------------------------------------------------------------- hyperparams

def draw_hyperparams(rng: np.random.Generator) -> Hyperparams:
    return Hyperparams(**{k: v[int(rng.integers(len(v)))] for k, v in SEARCH_SPACE.items()})


def optimize(train_set: EncodedDataset, validation: EncodedDataset, trials: int = 50,
             seed: int = 0) -> tuple[Hyperparams, ForestModel]:
    """Random search maximizing validation macro-F1; earliest trial wins ties."""
    if len(train_set) == 0 or len(validation) == 0:
        raise EmptyDataset("optimize needs non-empty training and validation sets")
    if not train_set.same_features(validation):
        raise FeatureMismatch("training and validation features differ")
    if trials < 1:
        raise ValueError("trials must be positive")
    rng = np.random.default_rng(seed)
    best = None
    tried: dict[Hyperparams, float] = {}
    for trial in range(trials):
        hp = draw_hyperparams(rng)
        if hp in tried:
            continue
        model = train(train_set, hp, seed)
        score = macro_f1(validation.labels, predict(model, validation))
        tried[hp] = score
        log.debug("trial %d %s -> %.4f", trial, hp, score)
        if best is None or score > best[0]:
            best = (score, hp, model)
    return best[1], best[2]


# ------------------------------------------------------------- serialization

def model_to_json(model: ForestModel) -> dict:
    return {
        "format": "ppm-retrain-forest",
        "version": MODEL_FORMAT_VERSION,
        "hyperparams": asdict(model.hyperparams),
        "training_seed": model.training_seed,
        "features": [f.to_json() for f in model.feature_specs],
        "trees": [{k: getattr(t, k).tolist() for k in ("left", "right", "feature", "kind", "value", "prob", "samples")}
                  for t in model.trees],
    }


def model_from_json(doc: dict) -> ForestModel:
    if doc.get("version") != MODEL_FORMAT_VERSION:
        raise ValueError(f"unsupported model format version {doc.get('version')!r}")
    dtypes = {"left": np.int64, "right": np.int64, "feature": np.int64, "kind": np.int64,
              "value": np.float64, "prob": np.float64, "samples": np.float64}
    trees = [Tree(**{k: np.asarray(t[k], dtype=dt) for k, dt in dtypes.items()}) for t in doc["trees"]]
    return ForestModel(trees, Hyperparams(**doc["hyperparams"]),
                       [FeatureSpec.from_json(f) for f in doc["features"]], doc["training_seed"])


def save_model(model: ForestModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_json(model), fh)


def load_model(path) -> ForestModel:
    with open(path, encoding="utf-8") as fh:
        return model_from_json(json.load(fh))
