"""Selection, scaling and SVM bundled as one deployable model.

The JSON form carries a format tag and version so stale files are rejected
rather than misread.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from ..errors import DegenerateTrainingError, SchemaError
from .scaling import MinMaxScaler, apply_minmax, fit_minmax
from .selection import PearsonSelector, resolve_thresholds
from .svm import SvmModel, svm_predict, svm_train
from .table import FeatureTable

__all__ = ["ModelBundle", "fit_bundle", "save_model", "load_model", "FORMAT_TAG", "FORMAT_VERSION"]

FORMAT_TAG = "airwaysurv-svm-model"
FORMAT_VERSION = 1


@dataclass(frozen=True, eq=False)
class ModelBundle:
    feature_names: tuple
    scaler: MinMaxScaler
    svm: SvmModel
    thresholds: dict = field(default_factory=dict)

    def decision_function(self, t: FeatureTable) -> np.ndarray:
        return svm_predict(self.svm, apply_minmax(self.scaler, t.select(self.feature_names)).values)[1]

    def predict(self, t: FeatureTable):
        """``(labels, decision_values)`` for every row of ``t``."""
        f = self.decision_function(t)
        return (f >= 0).astype(np.int64), f


def select_and_scale(t: FeatureTable, thresholds):
    """Fit selection then scaling on ``t``; returns ``(names, scaler)``."""
    thr = resolve_thresholds(t.feature_names, thresholds)
    sel = PearsonSelector(thr).fit(t.values, t.labels)
    names = tuple(n for n, keep in zip(t.feature_names, sel.support_) if keep)
    if not names:
        raise DegenerateTrainingError("no feature passed the correlation threshold")
    return names, fit_minmax(t.select(names))


def fit_bundle(t: FeatureTable, C: float, gamma: float, thresholds=0.0, tol: float = 1e-3) -> ModelBundle:
    """Select, scale and train on the whole of ``t``."""
    names, scaler = select_and_scale(t, thresholds)
    X = apply_minmax(scaler, t.select(names)).values
    svm = svm_train(X, t.labels, C, gamma, tol)
    if isinstance(thresholds, dict):
        thr = thresholds
    else:
        thr = {"*": 0.0 if thresholds is None else float(thresholds)}
    return ModelBundle(names, scaler, svm, dict(thr))


def save_model(b: ModelBundle, path, extra: dict | None = None) -> None:
    doc = {
        "format": FORMAT_TAG,
        "version": FORMAT_VERSION,
        "feature_names": list(b.feature_names),
        "thresholds": b.thresholds,
        "scaler": {"min": b.scaler.data_min_.tolist(), "max": b.scaler.data_max_.tolist()},
        "svm": b.svm.to_dict(),
    }
    if extra:
        doc["meta"] = extra
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_model(path) -> ModelBundle:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}: not a JSON model file ({exc})") from None
    if doc.get("format") != FORMAT_TAG:
        raise SchemaError(f"{path}: format tag {doc.get('format')!r} is not {FORMAT_TAG!r}")
    if doc.get("version") != FORMAT_VERSION:
        raise SchemaError(f"{path}: unsupported model version {doc.get('version')!r}")
    names = tuple(doc["feature_names"])
    scaler = MinMaxScaler()
    scaler.data_min_ = np.asarray(doc["scaler"]["min"], dtype=np.float64)
    scaler.data_max_ = np.asarray(doc["scaler"]["max"], dtype=np.float64)
    scaler.n_features_in_ = len(names)
    scaler.feature_names_ = names
    svm_doc = dict(doc["svm"], n_features=len(names))
    return ModelBundle(names, scaler, SvmModel.from_dict(svm_doc), doc.get("thresholds", {}))
