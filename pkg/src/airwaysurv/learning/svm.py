"""Soft-margin RBF support vector machine trained by SMO.

The dual ``min 1/2 a'Qa - e'a`` s.t. ``0 <= a <= C``, ``y'a = 0`` with
``Q_ij = y_i y_j K(x_i, x_j)`` is solved by pairwise updates on the maximal
violating pair. Iteration is deterministic: ties in the pair selection go to
the lowest index.
"""
from __future__ import annotations

import warnings
from collections import OrderedDict
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.exceptions import ConvergenceWarning
from sklearn.utils.multiclass import check_classification_targets
from sklearn.utils.validation import check_is_fitted, validate_data

from ..errors import DegenerateTrainingError, SchemaError

__all__ = ["SvmModel", "svm_train", "svm_predict", "rbf_kernel", "SMOClassifier"]

_TAU = 1e-12


def rbf_kernel(A, B, gamma: float) -> np.ndarray:
    """``exp(-gamma * ||a - b||^2)`` for all row pairs."""
    d2 = cdist(np.atleast_2d(A), np.atleast_2d(B), "sqeuclidean")
    return np.exp(-gamma * d2)


class _RowCache:
    """LRU cache of kernel rows ``K[i, :]`` over the training set."""

    def __init__(self, X: np.ndarray, gamma: float, capacity: int):
        self.X = X
        self.gamma = gamma
        self.capacity = max(2, capacity)
        self._rows: OrderedDict[int, np.ndarray] = OrderedDict()
        self.diag = np.ones(len(X))

    def row(self, i: int) -> np.ndarray:
        r = self._rows.get(i)
        if r is not None:
            self._rows.move_to_end(i)
            return r
        r = rbf_kernel(self.X[i], self.X, self.gamma)[0]
        self._rows[i] = r
        if len(self._rows) > self.capacity:
            self._rows.popitem(last=False)
        return r


@dataclass(frozen=True, eq=False)
class SvmModel:
    """Trained RBF classifier.

    ``dual_coefs`` holds ``alpha_i * y_i`` with internal labels in {-1, +1};
    label 1 maps to +1.
    """

    support_vectors: np.ndarray
    dual_coefs: np.ndarray
    bias: float
    gamma: float
    C: float
    n_iter: int = 0
    kkt_gap: float = 0.0

    def __post_init__(self):
        sv = np.array(self.support_vectors, dtype=np.float64, ndmin=2)
        dc = np.array(self.dual_coefs, dtype=np.float64).ravel()
        if len(sv) != len(dc):
            raise ValueError("one dual coefficient per support vector is required")
        sv.setflags(write=False)
        dc.setflags(write=False)
        object.__setattr__(self, "support_vectors", sv)
        object.__setattr__(self, "dual_coefs", dc)
        object.__setattr__(self, "bias", float(self.bias))

    @property
    def n_features(self) -> int:
        return self.support_vectors.shape[1]

    @property
    def alphas(self) -> np.ndarray:
        return np.abs(self.dual_coefs)

    def decision_function(self, X) -> np.ndarray:
        X = np.array(X, dtype=np.float64, ndmin=2)
        if X.shape[1] != self.n_features:
            raise SchemaError(f"model expects {self.n_features} features, got {X.shape[1]}")
        if len(self.dual_coefs) == 0:
            return np.full(len(X), self.bias)
        return rbf_kernel(X, self.support_vectors, self.gamma) @ self.dual_coefs + self.bias

    def to_dict(self) -> dict:
        return {
            "gamma": self.gamma,
            "C": self.C,
            "bias": self.bias,
            "support_vectors": self.support_vectors.tolist(),
            "dual_coefs": self.dual_coefs.tolist(),
            "n_iter": self.n_iter,
            "kkt_gap": self.kkt_gap,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SvmModel":
        n = len(d["dual_coefs"])
        sv = np.asarray(d["support_vectors"], dtype=np.float64).reshape(n, -1) if n else \
            np.zeros((0, int(d.get("n_features", 0))))
        return cls(sv, d["dual_coefs"], d["bias"], float(d["gamma"]), float(d["C"]),
                   int(d.get("n_iter", 0)), float(d.get("kkt_gap", 0.0)))


def _violating_pair(y, alpha, G, C):
    """Maximal violating pair ``(i, j, m, M)`` on ``-y * G``."""
    v = -y * G
    up = np.where(y > 0, alpha < C, alpha > 0)
    low = np.where(y > 0, alpha > 0, alpha < C)
    vu = np.where(up, v, -np.inf)
    vl = np.where(low, v, np.inf)
    i = int(np.argmax(vu))
    j = int(np.argmin(vl))
    return i, j, vu[i], vl[j]


def svm_train(X, y, C: float = 8000.0, gamma: float = 0.01, tol: float = 1e-3,
              max_iter: int | None = None, cache_rows: int = 1024) -> SvmModel:
    """Fit an RBF SVM on rows ``X`` with labels ``y`` in {0, 1}.

    Parameters
    ----------
    X : array of shape (n, d)
    y : array of shape (n,)
        Binary labels; 1 is the positive class.
    C, gamma : float
        Box constraint and RBF width.
    tol : float
        Stop once the maximal KKT violation ``m - M`` is at most ``tol``.
    max_iter : int, optional
        Defaults to ``max(10000, 100 * n)``. Hitting it raises a
        ``ConvergenceWarning``.

    Returns
    -------
    SvmModel
    """
    X = np.array(X, dtype=np.float64, ndmin=2)
    y01 = np.asarray(y).ravel()
    if len(X) != len(y01):
        raise ValueError("X and y have different lengths")
    if not (C > 0 and gamma > 0 and tol > 0):
        raise ValueError("C, gamma and tol must be positive")
    if not np.isin(y01, (0, 1)).all():
        raise ValueError("labels must be 0 or 1")
    if len(np.unique(y01)) < 2:
        raise DegenerateTrainingError("training labels contain a single class")
    y = np.where(y01 == 1, 1.0, -1.0)
    n = len(y)
    max_iter = max(10000, 100 * n) if max_iter is None else max_iter

    cache = _RowCache(X, gamma, cache_rows)
    alpha = np.zeros(n)
    G = -np.ones(n)
    it = 0
    while True:
        i, j, m, M = _violating_pair(y, alpha, G, C)
        if m - M <= tol:
            break
        if it >= max_iter:
            warnings.warn(f"SMO stopped after {it} iterations with KKT gap {m - M:.3g}",
                          ConvergenceWarning, stacklevel=2)
            break
        it += 1
        Ki = cache.row(i)
        Kj = cache.row(j)
        eta = max(Ki[i] + Kj[j] - 2.0 * Ki[j], _TAU)
        ti = C - alpha[i] if y[i] > 0 else alpha[i]
        tj = alpha[j] if y[j] > 0 else C - alpha[j]
        t = min((m - M) / eta, ti, tj)
        alpha[i] += y[i] * t
        alpha[j] -= y[j] * t
        # snap to the bound that limited the step
        if t == ti:
            alpha[i] = C if y[i] > 0 else 0.0
        if t == tj:
            alpha[j] = 0.0 if y[j] > 0 else C
        G += t * y * (Ki - Kj)

    i, j, m, M = _violating_pair(y, alpha, G, C)
    free = (alpha > 0) & (alpha < C)
    bias = float(np.mean(-y[free] * G[free])) if free.any() else float((m + M) / 2.0)
    sv = alpha > 0
    return SvmModel(X[sv], alpha[sv] * y[sv], bias, float(gamma), float(C), it, float(m - M))


def svm_predict(model: SvmModel, X):
    """Labels (1 where the decision value is >= 0) and decision values."""
    f = model.decision_function(X)
    return (f >= 0).astype(np.int64), f


class SMOClassifier(ClassifierMixin, BaseEstimator):
    """Estimator wrapper around :func:`svm_train`.

    ``classes_[1]`` is treated as the positive class.
    """

    def __init__(self, C=8000.0, gamma=0.01, tol=1e-3, max_iter=None):
        self.C = C
        self.gamma = gamma
        self.tol = tol
        self.max_iter = max_iter

    def fit(self, X, y):
        X, y = validate_data(self, X, y, dtype=np.float64)
        check_classification_targets(y)
        self.classes_ = np.unique(y)
        if len(self.classes_) == 1:
            raise DegenerateTrainingError("training labels contain only one class")
        if len(self.classes_) > 2:
            raise ValueError("Only binary classification is supported.")
        self.model_ = svm_train(X, (y == self.classes_[1]).astype(np.int64),
                                self.C, self.gamma, self.tol, self.max_iter)
        self.n_iter_ = self.model_.n_iter
        return self

    def decision_function(self, X):
        check_is_fitted(self, "model_")
        return self.model_.decision_function(validate_data(self, X, dtype=np.float64, reset=False))

    def __sklearn_tags__(self):
        tags = super().__sklearn_tags__()
        tags.classifier_tags.multi_class = False
        return tags

    def predict(self, X):
        f = self.decision_function(X)
        return self.classes_[(f >= 0).astype(np.int64)]
