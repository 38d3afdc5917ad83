"""Evaluation metrics."""
import numpy as np

from .errors import EmptyDataset, LengthMismatch


def macro_f1(gold, predicted) -> float:
    """Mean of the two per-class F1 scores; a class absent everywhere scores 0."""
    gold = np.asarray(gold, dtype=bool)
    predicted = np.asarray(predicted, dtype=bool)
    if gold.shape != predicted.shape:
        raise LengthMismatch("gold and predicted differ in length")
    if gold.size == 0:
        raise EmptyDataset("macro-F1 of an empty sequence")
    scores = []
    for cls in (True, False):
        tp = int(np.sum((gold == cls) & (predicted == cls)))
        fp = int(np.sum((gold != cls) & (predicted == cls)))
        fn = int(np.sum((gold == cls) & (predicted != cls)))
        scores.append(0.0 if tp == 0 else 2 * tp / (2 * tp + fp + fn))
    return sum(scores) / 2
