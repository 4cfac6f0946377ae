"""Feature selection, scaling, SVM training and evaluation."""
from .metrics import ClassificationReport, classification_report, mean_report, roc_auc
from .model import FORMAT_TAG, ModelBundle, fit_bundle, load_model, save_model
from .scaling import MinMaxScaler, apply_minmax, fit_minmax
from .selection import PearsonSelector, SelectionConfig, pearson_r, resolve_thresholds, select_features
from .svm import SMOClassifier, SvmModel, rbf_kernel, svm_predict, svm_train
from .table import FeatureTable, combine_tables, read_labels, read_table, write_table
from .validation import (DEFAULT_C_GRID, DEFAULT_GAMMA_GRID, CVResult, cross_validate,
                         grid_search, stratified_folds)

__all__ = [
    "ClassificationReport", "classification_report", "mean_report", "roc_auc",
    "FORMAT_TAG", "ModelBundle", "fit_bundle", "load_model", "save_model",
    "MinMaxScaler", "apply_minmax", "fit_minmax",
    "PearsonSelector", "SelectionConfig", "pearson_r", "resolve_thresholds", "select_features",
    "SMOClassifier", "SvmModel", "rbf_kernel", "svm_predict", "svm_train",
    "FeatureTable", "combine_tables", "read_labels", "read_table", "write_table",
    "DEFAULT_C_GRID", "DEFAULT_GAMMA_GRID", "CVResult", "cross_validate", "grid_search",
    "stratified_folds",
]
