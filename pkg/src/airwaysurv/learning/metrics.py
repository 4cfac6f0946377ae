"""Binary classification metrics."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy.stats import rankdata

from ..errors import EmptyInputError

__all__ = ["ClassificationReport", "classification_report", "roc_auc", "mean_report"]


@dataclass(frozen=True)
class ClassificationReport:
    """Metrics with their confusion counts.

    A ratio whose denominator is zero (for example sensitivity with no
    positives, or AUC with a single class) is NaN.
    """

    accuracy: float
    f1: float
    sensitivity: float
    specificity: float
    auc: float
    tp: int
    fp: int
    tn: int
    fn: int

    CSV_FIELDS = ("accuracy", "f1", "sensitivity", "specificity", "auc", "tp", "fp", "tn", "fn")

    @property
    def n(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def as_dict(self) -> dict:
        return asdict(self)


def _ratio(a: float, b: float) -> float:
    return a / b if b else float("nan")


def roc_auc(y_true, scores, positive: int = 1) -> float:
    """Area under the ROC curve from ranks, ties counted as one half."""
    y = np.asarray(y_true) == positive
    s = np.asarray(scores, dtype=np.float64)
    n_pos = int(y.sum())
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        return float("nan")
    ranks = rankdata(s)
    u = ranks[y].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def classification_report(y_true, y_pred, decision_values=None, positive: int = 1) -> ClassificationReport:
    """Accuracy, F1, sensitivity, specificity and AUC.

    Parameters
    ----------
    y_true, y_pred : array-like of {0, 1}
    decision_values : array-like, optional
        Scores that increase towards ``positive``. AUC is NaN without them.
    positive : int
        Label treated as the positive class.
    """
    yt = np.asarray(y_true).ravel()
    yp = np.asarray(y_pred).ravel()
    if len(yt) == 0:
        raise EmptyInputError("no predictions to score")
    if len(yt) != len(yp):
        raise ValueError("y_true and y_pred differ in length")
    pos_t = yt == positive
    pos_p = yp == positive
    tp = int(np.sum(pos_t & pos_p))
    fp = int(np.sum(~pos_t & pos_p))
    tn = int(np.sum(~pos_t & ~pos_p))
    fn = int(np.sum(pos_t & ~pos_p))
    if decision_values is None:
        auc = float("nan")
    else:
        dv = np.asarray(decision_values, dtype=np.float64).ravel()
        if len(dv) != len(yt):
            raise ValueError("decision_values and y_true differ in length")
        auc = roc_auc(yt, dv if positive == 1 else -dv, positive)
    return ClassificationReport(
        accuracy=(tp + tn) / len(yt),
        f1=_ratio(2 * tp, 2 * tp + fp + fn),
        sensitivity=_ratio(tp, tp + fn),
        specificity=_ratio(tn, tn + fp),
        auc=auc,
        tp=tp, fp=fp, tn=tn, fn=fn,
    )


def mean_report(reports) -> dict:
    """Per-field mean across reports, ignoring NaN; counts are summed."""
    out = {}
    for f in ClassificationReport.CSV_FIELDS:
        vals = np.array([getattr(r, f) for r in reports], dtype=np.float64)
        if f in ("tp", "fp", "tn", "fn"):
            out[f] = int(vals.sum())
        else:
            out[f] = float(np.nanmean(vals)) if np.isfinite(vals).any() else float("nan")
    return out
