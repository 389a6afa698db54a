"""Confusion counts and precision / recall / F-score.

Labels are zero-based. A prediction of ``None`` (or ``-1``) marks an
unclassifiable sample; it lands in the extra last column of the confusion
matrix, counts as a false negative of its true label and as nobody's false
positive.
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import LabelOutOfRangeError, LengthMismatchError

UNCLASSIFIED = -1


@dataclass(frozen=True)
class PRF:
    precision: np.ndarray
    recall: np.ndarray
    f_score: np.ndarray

    @property
    def macro(self):
        """Unweighted means ``(precision, recall, f_score)`` over labels."""
        return float(np.mean(self.precision)), float(np.mean(self.recall)), float(np.mean(self.f_score))


def _as_labels(values):
    return np.array([UNCLASSIFIED if v is None else int(v) for v in values], dtype=np.int64)


def confusion(true_labels, predicted, n_labels):
    """``K x (K+1)`` count matrix: rows are true labels, columns predictions.

    Column ``K`` collects unclassifiable predictions.
    """
    t = _as_labels(true_labels)
    p = _as_labels(predicted)
    if t.shape != p.shape:
        raise LengthMismatchError(f"{t.size} true labels but {p.size} predictions")
    K = int(n_labels)
    if np.any((t < 0) | (t >= K)):
        raise LabelOutOfRangeError(f"true labels must lie in 0..{K - 1}")
    if np.any((p < UNCLASSIFIED) | (p >= K)):
        raise LabelOutOfRangeError(f"predictions must lie in 0..{K - 1} or be unclassified")
    cm = np.zeros((K, K + 1), dtype=np.int64)
    np.add.at(cm, (t, np.where(p == UNCLASSIFIED, K, p)), 1)
    return cm


def _ratio(num, den):
    num = np.asarray(num, dtype=np.float64)
    den = np.asarray(den, dtype=np.float64)
    out = np.zeros_like(num)
    np.divide(num, den, out=out, where=den > 0)
    return out


def prf_scores(cm):
    """Per-label precision, recall and F-score from a confusion matrix.

    ``0/0`` is taken as 0.
    """
    cm = np.asarray(cm, dtype=np.int64)
    K = cm.shape[0]
    tp = np.diag(cm[:, :K])
    predicted = cm[:, :K].sum(axis=0)
    actual = cm.sum(axis=1)
    precision = _ratio(tp, predicted)
    recall = _ratio(tp, actual)
    f = _ratio(2.0 * precision * recall, precision + recall)
    return PRF(precision, recall, f)


def macro_f(true_labels, predicted, n_labels):
    return prf_scores(confusion(true_labels, predicted, n_labels)).macro[2]
