"""Correlation-threshold feature selection against binary labels."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.feature_selection import SelectorMixin
from sklearn.utils.validation import check_is_fitted, validate_data

from ..errors import MissingLabelsError, UndefinedCorrelationError
from .table import FeatureTable

__all__ = ["SelectionConfig", "pearson_r", "select_features", "PearsonSelector", "prefix_thresholds", "resolve_thresholds"]


@dataclass(frozen=True)
class SelectionConfig:
    threshold: float = 0.2

    def __post_init__(self):
        if not 0.0 <= self.threshold <= 1.0:
            raise ValueError("threshold must lie in [0, 1]")


def pearson_r(x, y) -> float:
    """Sample Pearson correlation.

    Raises :class:`UndefinedCorrelationError` when either input is constant.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("x and y must be 1-D arrays of equal length")
    if len(x) < 2:
        raise ValueError("need at least two samples")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = np.dot(dx, dx)
    syy = np.dot(dy, dy)
    if np.ptp(x) == 0 or np.ptp(y) == 0 or sxx == 0 or syy == 0:
        raise UndefinedCorrelationError("correlation of a constant input is undefined")
    r = np.dot(dx, dy) / np.sqrt(sxx * syy)
    return float(min(1.0, max(-1.0, r)))


def _abs_correlations(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    """|r| per column; NaN where undefined."""
    out = np.full(X.shape[1], np.nan)
    for c in range(X.shape[1]):
        try:
            out[c] = abs(pearson_r(X[:, c], y))
        except UndefinedCorrelationError:
            pass
    return out


class PearsonSelector(SelectorMixin, BaseEstimator):
    """Keep columns whose absolute correlation with ``y`` reaches a threshold.

    Parameters
    ----------
    thresholds : float or array-like of float
        One threshold for all columns, or one per column. Columns whose
        correlation is undefined (constant) are always dropped.
    """

    def __init__(self, thresholds=0.2):
        self.thresholds = thresholds

    def fit(self, X, y):
        X, y = validate_data(self, X, y, dtype=np.float64, ensure_min_samples=2)
        thr = np.broadcast_to(np.asarray(self.thresholds, dtype=np.float64), (X.shape[1],))
        if np.any((thr < 0) | (thr > 1)):
            raise ValueError("thresholds must lie in [0, 1]")
        self.abs_correlation_ = _abs_correlations(X, y)
        with np.errstate(invalid="ignore"):
            self.support_ = ~np.isnan(self.abs_correlation_) & (self.abs_correlation_ >= thr)
        return self

    def _get_support_mask(self):
        check_is_fitted(self, "support_")
        return self.support_


def prefix_thresholds(names, by_prefix: dict, default: float = 0.0) -> np.ndarray:
    """Per-column thresholds from ``{"trachea": 0.2, ...}`` keyed on ``prefix__``."""
    out = []
    for n in names:
        prefix = n.split("__", 1)[0] if "__" in n else None
        out.append(by_prefix.get(prefix, default))
    return np.array(out, dtype=np.float64)


def select_features(t: FeatureTable, cfg) -> list[str]:
    """Names with ``|r| >= threshold`` in original column order.

    ``cfg`` is a :class:`SelectionConfig` or a bare threshold.
    """
    if t.labels is None:
        raise MissingLabelsError("feature selection needs labels")
    threshold = cfg.threshold if isinstance(cfg, SelectionConfig) else SelectionConfig(float(cfg)).threshold
    sel = PearsonSelector(threshold).fit(t.values, t.labels)
    return [n for n, keep in zip(t.feature_names, sel.support_) if keep]


def resolve_thresholds(names, thresholds) -> np.ndarray:
    """Per-column thresholds from a float, a ``{prefix: value}`` dict or an array.

    ``None`` disables selection (threshold 0 keeps every non-constant column).
    """
    if thresholds is None:
        return np.zeros(len(names))
    if isinstance(thresholds, dict):
        default = float(thresholds.get("*", 0.0))
        return prefix_thresholds(names, thresholds, default)
    return np.broadcast_to(np.asarray(thresholds, dtype=np.float64), (len(names),)).copy()
