"""Stratified k-fold cross-validation and grid search."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from joblib import Parallel, delayed

from ..errors import DegenerateTrainingError, MissingLabelsError, StratificationError
from .metrics import classification_report, mean_report
from .model import fit_bundle, select_and_scale
from .scaling import apply_minmax
from .svm import svm_predict, svm_train
from .table import FeatureTable

__all__ = ["stratified_folds", "cross_validate", "grid_search", "CVResult",
           "DEFAULT_C_GRID", "DEFAULT_GAMMA_GRID", "SCALING_MODES"]

DEFAULT_C_GRID = (1.0, 10.0, 100.0, 1000.0, 8000.0, 1e4)
DEFAULT_GAMMA_GRID = (1e-3, 1e-2, 1e-1, 1.0)
SCALING_MODES = ("leak-free", "full-table")


def stratified_folds(labels, k: int = 5, seed: int = 0) -> np.ndarray:
    """Fold index per case.

    Each class is shuffled with ``numpy.random.default_rng(seed)`` and dealt
    round-robin; the deal continues across classes so fold sizes differ by at
    most one.
    """
    y = np.asarray(labels).ravel()
    if k < 2:
        raise ValueError("k must be at least 2")
    classes, counts = np.unique(y, return_counts=True)
    if len(classes) < 2:
        raise StratificationError("folds need both classes")
    if counts.min() < k:
        c = classes[np.argmin(counts)]
        raise StratificationError(f"class {c} has {counts.min()} cases, fewer than k={k}; "
                                  "some fold would miss it")
    rng = np.random.default_rng(seed)
    folds = np.empty(len(y), dtype=np.int64)
    start = 0
    for c in classes:
        idx = rng.permutation(np.flatnonzero(y == c))
        folds[idx] = (start + np.arange(len(idx))) % k
        start = (start + len(idx)) % k
    return folds


@dataclass(frozen=True)
class CVResult:
    folds: np.ndarray
    reports: tuple
    decision_values: np.ndarray
    C: float
    gamma: float

    @property
    def mean(self) -> dict:
        return mean_report(self.reports)

    @property
    def mean_accuracy(self) -> float:
        return float(np.mean([r.accuracy for r in self.reports]))


def _fold(t: FeatureTable, train, test, C, gamma, thresholds, tol, fixed):
    tr, te = t.subset(train), t.subset(test)
    if fixed is None:
        b = fit_bundle(tr, C, gamma, thresholds, tol)
        f = b.decision_function(te)
    else:
        names, scaler = fixed
        X = apply_minmax(scaler, tr.select(names)).values
        m = svm_train(X, tr.labels, C, gamma, tol)
        f = svm_predict(m, apply_minmax(scaler, te.select(names)).values)[1]
    return f


def cross_validate(t: FeatureTable, k: int = 5, C: float = 8000.0, gamma: float = 0.01,
                   seed: int = 0, thresholds=None, mode: str = "leak-free",
                   tol: float = 1e-3, n_jobs: int = 1) -> CVResult:
    """k-fold estimate of classification performance.

    Parameters
    ----------
    thresholds : float, dict or None
        Correlation thresholds; a dict maps column prefixes (``trachea``,
        ``airway``) to values. ``None`` keeps every non-constant column.
    mode : {"leak-free", "full-table"}
        ``leak-free`` fits selection and scaling inside each training fold.
        ``full-table`` fits them once on the whole table before splitting.
    """
    if t.labels is None:
        raise MissingLabelsError("cross-validation needs labels")
    if mode not in SCALING_MODES:
        raise ValueError(f"mode must be one of {SCALING_MODES}")
    if len(np.unique(t.labels)) < 2:
        raise DegenerateTrainingError("training labels contain a single class")
    folds = stratified_folds(t.labels, k, seed)
    fixed = select_and_scale(t, thresholds) if mode == "full-table" else None
    jobs = [(np.flatnonzero(folds != f), np.flatnonzero(folds == f)) for f in range(k)]
    if n_jobs == 1:
        outs = [_fold(t, tr, te, C, gamma, thresholds, tol, fixed) for tr, te in jobs]
    else:
        outs = Parallel(n_jobs=n_jobs)(
            delayed(_fold)(t, tr, te, C, gamma, thresholds, tol, fixed) for tr, te in jobs)
    dv = np.empty(len(folds))
    reports = []
    for (_, te), f in zip(jobs, outs):
        dv[te] = f
        reports.append(classification_report(t.labels[te], (f >= 0).astype(np.int64), f))
    return CVResult(folds, tuple(reports), dv, float(C), float(gamma))


def grid_search(t: FeatureTable, C_grid=DEFAULT_C_GRID, gamma_grid=DEFAULT_GAMMA_GRID,
                k: int = 5, seed: int = 0, thresholds=None, mode: str = "leak-free",
                tol: float = 1e-3, n_jobs: int = 1):
    """Exhaustive search for the highest mean CV accuracy.

    Ties go to the smaller C, then the smaller gamma.

    Returns
    -------
    best_C, best_gamma : float
    results : list of CVResult
        One per grid point, ordered by (C, gamma).
    """
    Cs = sorted(float(c) for c in C_grid)
    gs = sorted(float(g) for g in gamma_grid)
    if not Cs or not gs:
        raise ValueError("grids must be non-empty")
    points = [(c, g) for c in Cs for g in gs]
    run = delayed(cross_validate)
    if n_jobs == 1:
        results = [cross_validate(t, k, c, g, seed, thresholds, mode, tol) for c, g in points]
    else:
        results = Parallel(n_jobs=n_jobs)(run(t, k, c, g, seed, thresholds, mode, tol) for c, g in points)
    best = 0
    for n, r in enumerate(results):
        if r.mean_accuracy > results[best].mean_accuracy:
            best = n
    return points[best][0], points[best][1], results
