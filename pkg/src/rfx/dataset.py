"""Tabular data ingestion.

A :class:`Dataset` is the immutable training matrix every other module reads:
column-typed features (numeric or categorical, categoricals held as dense
level codes) plus integer class labels.  Loading is strict: missing values,
unknown schema columns, and non-numeric tokens are rejected with the offending
location rather than imputed.
"""

import csv
import json
from dataclasses import dataclass

import numpy as np

from .errors import DataError

#: Largest categorical cardinality that exact subset enumeration supports
#: (level masks must fit one machine word).
MAX_CATEGORICAL_LEVELS = 32


@dataclass(frozen=True)
class ColumnKind:
    """Declared kind of one feature column.

    ``levels`` is empty for numeric columns; for categorical columns it lists
    the level names in code order (code k <-> levels[k]).
    """

    kind: str  # "numeric" | "categorical"
    levels: tuple = ()

    def __post_init__(self):
        if self.kind not in ("numeric", "categorical"):
            raise DataError(f"unknown column kind {self.kind!r}")
        if self.kind == "categorical":
            if len(self.levels) < 2:
                raise DataError(
                    f"categorical column needs at least 2 levels, got {len(self.levels)}"
                )
            if len(self.levels) > MAX_CATEGORICAL_LEVELS:
                raise DataError(
                    f"categorical column has {len(self.levels)} levels; "
                    f"exact split enumeration supports at most {MAX_CATEGORICAL_LEVELS}"
                )
            if len(set(self.levels)) != len(self.levels):
                raise DataError("duplicate level names in categorical column")

    @property
    def is_categorical(self) -> bool:
        return self.kind == "categorical"

    @property
    def level_count(self) -> int:
        return len(self.levels)


@dataclass(frozen=True)
class Dataset:
    """Immutable training matrix.

    ``values`` is column-major (Fortran order) float64 of shape (n, p);
    categorical cells hold their level code.  ``labels`` are class codes
    0..C-1 in first-appearance order of ``class_names``.
    """

    feature_names: tuple
    columns: tuple            # ColumnKind per feature
    values: np.ndarray        # (n, p) float64, F-order
    labels: np.ndarray        # (n,) int32
    class_names: tuple

    def __post_init__(self):
        n, p = self.values.shape
        if n < 2:
            raise DataError(f"need at least 2 samples, got {n}")
        if len(self.class_names) < 2:
            raise DataError("need at least 2 classes")
        if len(self.columns) != p or len(self.feature_names) != p:
            raise DataError("column metadata does not match value matrix width")
        if self.labels.shape != (n,):
            raise DataError("labels length does not match sample count")
        if self.labels.min() < 0 or self.labels.max() >= len(self.class_names):
            raise DataError("label code out of range")
        for j, col in enumerate(self.columns):
            if col.is_categorical:
                codes = self.values[:, j]
                if codes.min() < 0 or codes.max() >= col.level_count:
                    raise DataError(f"categorical code out of range in column {j}")
        self.values.setflags(write=False)
        self.labels.setflags(write=False)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]

    @property
    def class_count(self) -> int:
        return len(self.class_names)

    def column_index(self, name: str) -> int:
        try:
            return self.feature_names.index(name)
        except ValueError:
            raise DataError(f"no feature named {name!r}") from None


def read_schema(path) -> dict:
    """Read a schema file: JSON list of {column, kind, levels?} entries.

    Returns a mapping column name -> ("numeric"|"categorical", levels or None).
    ``levels``, when present, fixes the code order; otherwise codes follow
    first appearance in the data.
    """
    with open(path, "r", encoding="utf-8") as fh:
        entries = json.load(fh)
    if not isinstance(entries, list):
        raise DataError("schema file must be a JSON list")
    schema = {}
    for e in entries:
        if "column" not in e or "kind" not in e:
            raise DataError(f"schema entry missing 'column' or 'kind': {e}")
        levels = e.get("levels")
        if levels is not None:
            levels = tuple(str(v) for v in levels)
        schema[str(e["column"])] = (str(e["kind"]), levels)
    return schema


def load_csv(path, schema: dict, label_column: str) -> Dataset:
    """Load a comma-separated, header-first, UTF-8 file into a Dataset.

    ``schema`` maps every feature column name to ("numeric", None) or
    ("categorical", levels-or-None).  Categorical level codes and label codes
    are assigned in first-appearance order unless the schema pins the levels.

    Raises DataError naming the 1-based data row and the column for empty
    cells and unparseable numeric tokens.
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        rows = list(reader)

    header = [h.strip() for h in header]
    if label_column not in header:
        raise DataError(f"label column {label_column!r} not in header {header}")
    for name in schema:
        if name not in header:
            raise DataError(f"schema column {name!r} not present in {path}")

    feature_names = [h for h in header if h != label_column]
    missing = [h for h in feature_names if h not in schema]
    if missing:
        raise DataError(f"schema does not cover columns: {missing}")

    n = len(rows)
    p = len(feature_names)
    if n == 0:
        raise DataError(f"{path}: no data rows")

    label_pos = header.index(label_column)
    feat_pos = [header.index(h) for h in feature_names]

    values = np.zeros((n, p), dtype=np.float64, order="F")
    labels = np.zeros(n, dtype=np.int32)
    class_codes: dict = {}
    # per-column level maps; pre-seeded when the schema pins levels
    level_maps: list = []
    pinned: list = []
    for name in feature_names:
        kind, levels = schema[name]
        if kind == "categorical" and levels is not None:
            level_maps.append({lv: k for k, lv in enumerate(levels)})
            pinned.append(True)
        else:
            level_maps.append({})
            pinned.append(False)

    for r, row in enumerate(rows):
        if len(row) != len(header):
            raise DataError(f"{path}: row {r + 1} has {len(row)} fields, expected {len(header)}")
        tok = row[label_pos].strip()
        if tok == "":
            raise DataError(f"{path}: missing value at row {r + 1}, column {label_column!r}")
        if tok not in class_codes:
            class_codes[tok] = len(class_codes)
        labels[r] = class_codes[tok]

        for j, pos in enumerate(feat_pos):
            tok = row[pos].strip()
            name = feature_names[j]
            if tok == "":
                raise DataError(f"{path}: missing value at row {r + 1}, column {name!r}")
            kind, _ = schema[name]
            if kind == "numeric":
                try:
                    values[r, j] = float(tok)
                except ValueError:
                    raise DataError(
                        f"{path}: non-numeric token {tok!r} at row {r + 1}, column {name!r}"
                    ) from None
            else:
                lm = level_maps[j]
                if tok not in lm:
                    if pinned[j]:
                        raise DataError(
                            f"{path}: unknown level {tok!r} at row {r + 1}, column {name!r}"
                        )
                    if len(lm) >= MAX_CATEGORICAL_LEVELS:
                        raise DataError(
                            f"{path}: column {name!r} exceeds "
                            f"{MAX_CATEGORICAL_LEVELS} categorical levels"
                        )
                    lm[tok] = len(lm)
                values[r, j] = lm[tok]

    if len(class_codes) < 2:
        raise DataError(f"{path}: label column {label_column!r} has a single class")

    columns = []
    for j, name in enumerate(feature_names):
        kind, levels = schema[name]
        if kind == "numeric":
            columns.append(ColumnKind("numeric"))
        else:
            if pinned[j]:
                lv = schema[name][1]
            else:
                lm = level_maps[j]
                lv = tuple(sorted(lm, key=lm.get))
            columns.append(ColumnKind("categorical", tuple(lv)))

    class_names = tuple(sorted(class_codes, key=class_codes.get))
    return Dataset(
        feature_names=tuple(feature_names),
        columns=tuple(columns),
        values=values,
        labels=labels,
        class_names=class_names,
    )


def from_arrays(values, labels, columns=None, feature_names=None, class_names=None) -> Dataset:
    """Build a Dataset directly from arrays (test fixtures, library use).

    Defaults: all-numeric columns, generated feature names, stringified
    first-appearance class names.
    """
    values = np.asfortranarray(np.asarray(values, dtype=np.float64))
    labels_in = np.asarray(labels)
    n, p = values.shape
    if columns is None:
        columns = tuple(ColumnKind("numeric") for _ in range(p))
    if feature_names is None:
        feature_names = tuple(f"x{j}" for j in range(p))
    if class_names is None:
        seen: dict = {}
        codes = np.empty(n, dtype=np.int32)
        for i, lab in enumerate(labels_in):
            key = str(lab)
            if key not in seen:
                seen[key] = len(seen)
            codes[i] = seen[key]
        class_names = tuple(sorted(seen, key=seen.get))
        labels_arr = codes
    else:
        labels_arr = labels_in.astype(np.int32)
    return Dataset(
        feature_names=tuple(feature_names),
        columns=tuple(columns),
        values=values,
        labels=labels_arr,
        class_names=tuple(class_names),
    )
