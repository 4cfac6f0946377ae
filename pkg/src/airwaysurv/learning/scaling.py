"""Per-feature min-max scaling fitted on training data."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted, validate_data

from ..errors import SchemaError
from .table import FeatureTable

__all__ = ["MinMaxScaler", "fit_minmax", "apply_minmax"]


class MinMaxScaler(TransformerMixin, BaseEstimator):
    """Map each training column onto [0, 1] by ``(x - min) / (max - min)``.

    Constant training columns map to 0. Values seen later are not clipped, so
    they may land outside [0, 1].
    """

    def fit(self, X, y=None):
        X = validate_data(self, X, dtype=np.float64)
        self.data_min_ = X.min(axis=0)
        self.data_max_ = X.max(axis=0)
        return self

    def transform(self, X):
        check_is_fitted(self, "data_min_")
        X = validate_data(self, X, dtype=np.float64, reset=False)
        span = self.data_max_ - self.data_min_
        out = np.zeros_like(X)
        live = span > 0
        out[:, live] = (X[:, live] - self.data_min_[live]) / span[live]
        return out


def fit_minmax(t: FeatureTable) -> MinMaxScaler:
    scaler = MinMaxScaler().fit(t.values)
    scaler.feature_names_ = t.feature_names
    return scaler


def apply_minmax(scaler: MinMaxScaler, t: FeatureTable) -> FeatureTable:
    """Scale ``t`` by column name; every column must be known to the scaler."""
    known = list(scaler.feature_names_)
    unseen = [n for n in t.feature_names if n not in known]
    if unseen:
        raise SchemaError(f"feature {unseen[0]!r} was not seen when fitting the scaler")
    cols = [known.index(n) for n in t.feature_names]
    span = scaler.data_max_[cols] - scaler.data_min_[cols]
    out = np.zeros_like(t.values)
    live = span > 0
    out[:, live] = (t.values[:, live] - scaler.data_min_[cols][live]) / span[live]
    return t.with_values(out)
