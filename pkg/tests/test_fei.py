import itertools
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ppm_retrain.encoding import ACTIVITY, EncodedDataset, FeatureSpec
from ppm_retrain.errors import EmptyClass, EmptyQuadrant
from ppm_retrain.fei import (FEI, FN, FP, TN, TP, ConfusionMatrix, FEIPair, RankedFEI, build_pairs,
                             confusion_from_labels, describe, m_score, mine_feis, rank_and_select,
                             satisfying)


def brute_force_frequent(txs, min_support, max_size):
    items = sorted(set().union(*txs)) if txs else []
    out = {}
    for k in range(1, max_size + 1):
        for combo in itertools.combinations(items, k):
            s = frozenset(combo)
            sup = sum(s <= t for t in txs) / len(txs)
            if sup >= min_support:
                out[s] = sup
    return out


def test_apriori_matches_brute_force():
    rng = random.Random(3)
    universe = list("abcdefghijkl")
    for _ in range(50):
        n_items = rng.randint(1, 12)
        pool = [(x, 1) for x in universe[:n_items]]
        txs = [frozenset(x for x in pool if rng.random() < 0.45) for _ in range(rng.randint(1, 15))]
        ms = rng.choice([0.1, 0.2, 0.3, 0.5])
        got = {f.items: f.support for f in mine_feis(txs, ms, max_size=4)}
        assert got == brute_force_frequent(txs, ms, 4)


def test_apriori_small_example():
    A, B = ("f", "A"), ("f", "B")
    txs = [{A}, {A}, {A, B}, {B}]
    got = {f.items: f.support for f in mine_feis(txs, 0.5)}
    assert got == {frozenset({A}): 0.75, frozenset({B}): 0.5}


def test_apriori_order_and_errors():
    a, b = ("x", "a"), ("y", "b")
    txs = [{a, b}, {a, b}, {a}]
    feis = mine_feis(txs, 0.5)
    assert [sorted(f.items) for f in feis] == [[a], [b], [a, b]]
    with pytest.raises(EmptyQuadrant):
        mine_feis([], 0.2, "FP")
    with pytest.raises(ValueError):
        FEI(frozenset(), TP, 1.0)


@settings(max_examples=30)
@given(st.lists(st.frozensets(st.tuples(st.sampled_from("abcde"), st.just(1))), min_size=1, max_size=12))
def test_supports_are_downward_closed(txs):
    feis = {f.items: f.support for f in mine_feis(txs, 0.25)}
    for s, sup in feis.items():
        for x in s:
            if len(s) > 1:
                assert feis[s - {x}] >= sup


@settings(max_examples=20)
@given(st.lists(st.frozensets(st.tuples(st.sampled_from("abcd"), st.just(1))), min_size=1, max_size=10))
def test_duplicating_transactions_keeps_supports(txs):
    one = {f.items: f.support for f in mine_feis(txs, 0.3)}
    two = {f.items: f.support for f in mine_feis(txs + txs, 0.3)}
    assert one == two


# ---------------------------------------------------------------- M-score

def table(rows):
    feats = [FeatureSpec(n, ACTIVITY, tuple(sorted({r[j] for r in rows}))) for j, n in enumerate("xy")]
    return EncodedDataset(feats, np.array(rows, dtype=object), [False] * len(rows),
                          [f"t{i}" for i in range(len(rows))])


def test_m_score_extremes_and_midpoint():
    ds = table([("a", "p"), ("a", "p"), ("b", "p"), ("b", "q"), ("b", "q")])
    cl, ncl = {"t0", "t1"}, {"t2", "t3", "t4"}
    assert m_score({("x", "a")}, cl, ncl, ds) == 1.0
    assert m_score({("y", "p")}, {"t0"}, {"t1"}, ds) == 0.0
    # 4/5 inside the class minus 1/5 outside
    ds = table([("a", "p")] * 4 + [("b", "p")] + [("a", "q")] + [("b", "q")] * 4)
    cl, ncl = {f"t{i}" for i in range(5)}, {f"t{i}" for i in range(5, 10)}
    assert m_score({("x", "a")}, cl, ncl, ds) == pytest.approx(0.6)


def test_m_score_random_against_ratio():
    rng = random.Random(5)
    for _ in range(200):
        n_cl, n_ncl = rng.randint(1, 12), rng.randint(1, 12)
        hit_cl, hit_ncl = rng.randint(0, n_cl), rng.randint(0, n_ncl)
        rows = ([("a", "p")] * hit_cl + [("b", "p")] * (n_cl - hit_cl)
                + [("a", "q")] * hit_ncl + [("b", "q")] * (n_ncl - hit_ncl))
        ds = table(rows)
        cl = {f"t{i}" for i in range(n_cl)}
        ncl = {f"t{i}" for i in range(n_cl, n_cl + n_ncl)}
        got = m_score({("x", "a")}, cl, ncl, ds)
        assert got == pytest.approx(hit_cl / n_cl - hit_ncl / n_ncl)
        assert -1.0 <= got <= 1.0


def test_m_score_errors():
    ds = table([("a", "p"), ("b", "q")])
    with pytest.raises(EmptyClass):
        m_score({("x", "a")}, set(), {"t0"}, ds)
    with pytest.raises(ValueError):
        m_score({("x", "a")}, {"t0"}, {"t0"}, ds)


def test_satisfying_conjunction():
    ds = table([("a", "p"), ("a", "q"), ("b", "p")])
    assert satisfying({("x", "a"), ("y", "p")}, ds) == {"t0"}
    assert satisfying(set(), ds) == {"t0", "t1", "t2"}
    assert satisfying({("x", "zz")}, ds) == set()


def test_describe():
    assert describe({("y", 1), ("x", "a")}) == "x=a AND y=1"


# ---------------------------------------------------------------- confusion & ranking

def test_confusion_matrix_quadrants():
    cm = confusion_from_labels(["a", "b", "c", "d"], [True, True, False, False], [True, False, True, False])
    assert cm[TP] == {"a"} and cm[FN] == {"b"} and cm[FP] == {"c"} and cm[TN] == {"d"}
    assert cm.counts() == {TP: 1, FP: 1, TN: 1, FN: 1}
    cm = confusion_from_labels(["a", "b"], [True, True], [True, True])
    assert cm.counts() == {TP: 2, FP: 0, TN: 0, FN: 0}


def test_rank_and_select_top_k_and_empty_class():
    ds = table([("a", "p"), ("a", "p"), ("b", "q"), ("b", "q")])
    cm = ConfusionMatrix({TP: frozenset({"t0", "t1"}), FP: frozenset(), TN: frozenset({"t2", "t3"}),
                          FN: frozenset()})
    feis = {TP: mine_feis([{("x", "a"), ("y", "p")}] * 2, 0.2, TP),
            TN: mine_feis([{("x", "b"), ("y", "q")}] * 2, 0.2, TN)}
    selected, notes = rank_and_select(feis, cm, ds, k=2)
    assert len(selected["+"]) == 2 and all(r.m_score == 1.0 for r in selected["+"])
    assert selected[TP] == [] and any("TP" in n for n in notes)
    with pytest.raises(ValueError):
        rank_and_select(feis, cm, ds, k=0)


def ranked(items, name):
    return RankedFEI(FEI(frozenset(items), name, 1.0), 0.5, name)


def test_build_pairs_examples():
    sel = {"+": [ranked({("CType", "Gold")}, "+")],
           FP: [ranked({("event_4", "Accept Claim")}, FP)],
           TP: [ranked({("PClaims", "No")}, TP)],
           "-": [], TN: [], FN: []}
    pairs = build_pairs(sel)
    fp = pairs[FP][0]
    assert fp.characterization == {("CType", "Gold"), ("event_4", "Accept Claim")}
    assert fp.to_shuffle == {("event_4", "Accept Claim")}
    assert pairs[TP][0].to_shuffle == frozenset()
    assert pairs[TN] == [] and pairs[FN] == []


def test_build_pairs_bounded_and_deduplicated():
    k = 3
    sel = {name: [ranked({(f"f{i}", "v")}, name) for i in range(k)] for name in ("+", "-", TP, FP, TN, FN)}
    pairs = build_pairs(sel)
    for quad in (TP, FP, TN, FN):
        assert len(pairs[quad]) <= k * k
        keys = [(p.characterization, p.to_shuffle) for p in pairs[quad]]
        assert len(keys) == len(set(keys))


def test_pair_validation():
    with pytest.raises(ValueError):
        FEIPair(frozenset({("a", 1)}), frozenset({("b", 1)}), FP)
    with pytest.raises(ValueError):
        FEIPair(frozenset({("a", 1)}), frozenset({("a", 1)}), TP)
    with pytest.raises(ValueError):
        FEIPair(frozenset({("a", 1)}), frozenset(), FN)
