import pytest
from hypothesis import given
from hypothesis import strategies as st
from sklearn.metrics import f1_score

from ppm_retrain.errors import EmptyDataset, LengthMismatch
from ppm_retrain.metrics import macro_f1

pairs = st.lists(st.tuples(st.booleans(), st.booleans()), min_size=1, max_size=50)


@given(pairs)
def test_symmetric_under_class_swap(rows):
    gold, pred = zip(*rows)
    flipped = macro_f1([not g for g in gold], [not p for p in pred])
    assert macro_f1(gold, pred) == pytest.approx(flipped)


@given(pairs)
def test_agrees_with_sklearn(rows):
    gold, pred = zip(*rows)
    ref = f1_score(gold, pred, average="macro", labels=[True, False], zero_division=0)
    assert macro_f1(gold, pred) == pytest.approx(ref)


def test_examples():
    assert macro_f1([True, False], [True, False]) == 1.0
    assert macro_f1([True, False], [False, True]) == 0.0
    assert macro_f1([True, True], [True, True]) == 0.5


def test_errors():
    with pytest.raises(LengthMismatch):
        macro_f1([True], [True, False])
    with pytest.raises(EmptyDataset):
        macro_f1([], [])
