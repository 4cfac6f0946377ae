"""Per-case feature tables and their CSV form.

CSV layout: header ``case_id,<feature...>[,label]``, one row per case, floats
written with 17 significant digits so a write/read cycle is lossless.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from ..errors import AlignmentError, SchemaError

__all__ = ["FeatureTable", "combine_tables", "read_table", "write_table", "read_labels"]

LABEL_COLUMN = "label"


@dataclass(frozen=True, eq=False)
class FeatureTable:
    case_ids: tuple
    feature_names: tuple
    values: np.ndarray
    labels: np.ndarray | None = None

    def __post_init__(self):
        ids = tuple(str(c) for c in self.case_ids)
        names = tuple(str(n) for n in self.feature_names)
        vals = np.asarray(self.values, dtype=np.float64).reshape(len(ids), len(names))
        if len(set(ids)) != len(ids):
            raise SchemaError("case ids must be unique")
        if len(set(names)) != len(names):
            raise SchemaError("feature names must be unique")
        if not np.all(np.isfinite(vals)):
            raise SchemaError("feature values must be finite")
        labels = self.labels
        if labels is not None:
            labels = np.asarray(labels).astype(np.int64)
            if labels.shape != (len(ids),):
                raise SchemaError("labels must have one entry per case")
            if not np.isin(labels, (0, 1)).all():
                raise SchemaError("labels must be 0 or 1")
            labels.setflags(write=False)
        vals.setflags(write=False)
        object.__setattr__(self, "case_ids", ids)
        object.__setattr__(self, "feature_names", names)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "labels", labels)

    @property
    def shape(self):
        return self.values.shape

    def column(self, name: str) -> np.ndarray:
        try:
            return self.values[:, self.feature_names.index(name)]
        except ValueError:
            raise SchemaError(f"unknown feature column {name!r}") from None

    def select(self, names) -> "FeatureTable":
        """Columns ``names`` in the given order."""
        index = {n: i for i, n in enumerate(self.feature_names)}
        missing = [n for n in names if n not in index]
        if missing:
            raise SchemaError(f"missing feature column {missing[0]!r}")
        cols = [index[n] for n in names]
        return FeatureTable(self.case_ids, tuple(names), self.values[:, cols], self.labels)

    def subset(self, rows) -> "FeatureTable":
        rows = np.asarray(rows)
        labels = None if self.labels is None else self.labels[rows]
        return FeatureTable(tuple(np.asarray(self.case_ids)[rows]), self.feature_names,
                            self.values[rows], labels)

    def with_labels(self, labels) -> "FeatureTable":
        return FeatureTable(self.case_ids, self.feature_names, self.values, labels)

    def with_values(self, values) -> "FeatureTable":
        return FeatureTable(self.case_ids, self.feature_names, values, self.labels)


def combine_tables(a: FeatureTable, b: FeatureTable, prefixes=("trachea", "airway")) -> FeatureTable:
    """Column-wise concatenation with ``<prefix>__`` added to each name."""
    if a.case_ids != b.case_ids:
        raise AlignmentError("tables do not list the same cases in the same order")
    if a.labels is not None and b.labels is not None and not np.array_equal(a.labels, b.labels):
        raise AlignmentError("tables disagree on labels")
    labels = a.labels if a.labels is not None else b.labels
    pa, pb = prefixes
    names = tuple(f"{pa}__{n}" for n in a.feature_names) + tuple(f"{pb}__{n}" for n in b.feature_names)
    return FeatureTable(a.case_ids, names, np.hstack([a.values, b.values]), labels)


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_table(t: FeatureTable, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        header = ["case_id", *t.feature_names]
        if t.labels is not None:
            header.append(LABEL_COLUMN)
        w.writerow(header)
        for r, cid in enumerate(t.case_ids):
            row = [cid, *map(_fmt, t.values[r])]
            if t.labels is not None:
                row.append(str(int(t.labels[r])))
            w.writerow(row)


def read_table(path) -> FeatureTable:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][0] != "case_id":
        raise SchemaError(f"{path}: first column must be case_id")
    header = rows[0]
    has_label = header[-1] == LABEL_COLUMN
    names = header[1:-1] if has_label else header[1:]
    ids, vals, labels = [], [], []
    for line, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise SchemaError(f"{path}:{line}: expected {len(header)} fields, got {len(row)}")
        ids.append(row[0])
        try:
            vals.append([float(x) for x in row[1:len(names) + 1]])
        except ValueError as exc:
            raise SchemaError(f"{path}:{line}: {exc}") from None
        if has_label:
            labels.append(int(row[-1]))
    values = np.array(vals, dtype=np.float64).reshape(len(ids), len(names))
    return FeatureTable(tuple(ids), tuple(names), values, np.array(labels) if has_label else None)


def read_labels(path) -> dict[str, int]:
    """Two-column ``case_id,label`` file."""
    out = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:2]] != ["case_id", "label"]:
            raise SchemaError(f"{path}: expected header 'case_id,label'")
        for row in reader:
            if not row:
                continue
            lab = int(row[1])
            if lab not in (0, 1):
                raise SchemaError(f"{path}: label for {row[0]} must be 0 or 1")
            out[row[0]] = lab
    return out

