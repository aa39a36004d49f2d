"""Schema-typed tabular datasets, seeded random streams, splits and CSV I/O."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .errors import (
    DegenerateSplit,
    EmptyClass,
    IoError,
    MissingLabel,
    ParseError,
    SchemaMismatch,
)


# --------------------------------------------------------------------------
# Schema
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Column:
    """A named column. ``levels is None`` marks a numeric column."""

    name: str
    levels: Optional[tuple] = None

    def __post_init__(self):
        if self.levels is not None:
            levels = tuple(str(v) for v in self.levels)
            object.__setattr__(self, "levels", levels)
            if not levels:
                raise SchemaMismatch(f"categorical column {self.name!r} has no levels")
            if len(set(levels)) != len(levels):
                raise SchemaMismatch(f"categorical column {self.name!r} has duplicate levels")

    @property
    def is_categorical(self) -> bool:
        return self.levels is not None

    @classmethod
    def numeric(cls, name: str) -> "Column":
        return cls(name)

    @classmethod
    def categorical(cls, name: str, levels: Sequence[str]) -> "Column":
        return cls(name, tuple(levels))

    def to_dict(self) -> dict:
        if self.levels is None:
            return {"name": self.name, "kind": "numeric"}
        return {"name": self.name, "kind": "categorical", "levels": list(self.levels)}

    @classmethod
    def from_dict(cls, d: dict) -> "Column":
        if d["kind"] == "numeric":
            return cls(d["name"])
        return cls(d["name"], tuple(d["levels"]))


@dataclass(frozen=True)
class Schema:
    """Ordered columns (label column included) plus the label designation."""

    columns: tuple
    label_name: str
    positive_label: str

    def __post_init__(self):
        object.__setattr__(self, "columns", tuple(self.columns))
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise SchemaMismatch("column names must be unique")
        if self.label_name not in names:
            raise MissingLabel(f"label column {self.label_name!r} not in schema")
        label = self.label_column
        if not label.is_categorical or len(label.levels) != 2:
            raise SchemaMismatch("label column must be categorical with exactly 2 levels")
        if self.positive_label not in label.levels:
            raise SchemaMismatch(f"positive label {self.positive_label!r} is not a label level")

    @property
    def label_column(self) -> Column:
        return next(c for c in self.columns if c.name == self.label_name)

    @property
    def negative_label(self) -> str:
        return next(v for v in self.label_column.levels if v != self.positive_label)

    @property
    def feature_columns(self) -> tuple:
        return tuple(c for c in self.columns if c.name != self.label_name)

    @property
    def feature_names(self) -> list:
        return [c.name for c in self.feature_columns]

    @property
    def numeric_idx(self) -> list:
        return [i for i, c in enumerate(self.feature_columns) if not c.is_categorical]

    @property
    def categorical_idx(self) -> list:
        return [i for i, c in enumerate(self.feature_columns) if c.is_categorical]

    def to_dict(self) -> dict:
        return {
            "columns": [c.to_dict() for c in self.columns],
            "label_name": self.label_name,
            "positive_label": self.positive_label,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Schema":
        return cls(tuple(Column.from_dict(c) for c in d["columns"]),
                   d["label_name"], d["positive_label"])

    @classmethod
    def build(cls, features: Sequence[Column], label_name: str = "y",
              label_levels=("0", "1"), positive_label: str = "1") -> "Schema":
        cols = tuple(features) + (Column(label_name, tuple(label_levels)),)
        return cls(cols, label_name, positive_label)


# --------------------------------------------------------------------------
# Provenance
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Real:
    def to_dict(self) -> dict:
        return {"kind": "real"}


@dataclass(frozen=True)
class Synthetic:
    generator_seed: int
    generator_class: str

    def to_dict(self) -> dict:
        return {"kind": "synthetic", "generator_seed": self.generator_seed,
                "generator_class": self.generator_class}


Provenance = Union[Real, Synthetic]


def provenance_from_dict(d: dict) -> Provenance:
    if d["kind"] == "real":
        return Real()
    return Synthetic(int(d["generator_seed"]), d["generator_class"])


# --------------------------------------------------------------------------
# Dataset
# --------------------------------------------------------------------------


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class TabularDataset:
    """Feature rows plus a binary label.

    ``features`` is an ``(n, p)`` float array over the feature columns in
    schema order; categorical cells hold integer level codes.
    """

    schema: Schema
    features: np.ndarray
    labels: np.ndarray
    provenance: Provenance = field(default_factory=Real)

    def __post_init__(self):
        X = np.asarray(self.features, dtype=np.float64)
        y = np.asarray(self.labels)
        p = len(self.schema.feature_columns)
        if X.ndim == 1 and p == 1:
            X = X[:, None]
        if X.ndim != 2 or X.shape[1] != p:
            raise SchemaMismatch(f"features must have shape (n, {p}), got {X.shape}")
        if X.shape[0] < 1:
            raise SchemaMismatch("dataset must have at least one row")
        if y.shape != (X.shape[0],):
            raise SchemaMismatch("labels must be a vector with one entry per row")
        if not np.all((y == 0) | (y == 1)):
            raise SchemaMismatch("labels must be 0/1")
        if not np.all(np.isfinite(X)):
            raise SchemaMismatch("non-finite feature value")
        for j, col in enumerate(self.schema.feature_columns):
            if col.is_categorical:
                codes = X[:, j]
                if np.any(codes != np.round(codes)) or codes.min() < 0 or codes.max() >= len(col.levels):
                    raise SchemaMismatch(f"invalid level code in column {col.name!r}")
        object.__setattr__(self, "features", _frozen(X))
        object.__setattr__(self, "labels", _frozen(y.astype(np.int64)))

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def n_rows(self) -> int:
        return self.features.shape[0]

    def __eq__(self, other) -> bool:
        if not isinstance(other, TabularDataset):
            return NotImplemented
        return (self.schema == other.schema and self.provenance == other.provenance
                and np.array_equal(self.features, other.features)
                and np.array_equal(self.labels, other.labels))

    __hash__ = None

    def subset(self, ids) -> "TabularDataset":
        ids = np.asarray(ids, dtype=np.int64)
        return TabularDataset(self.schema, self.features[ids], self.labels[ids], self.provenance)

    def with_provenance(self, provenance: Provenance) -> "TabularDataset":
        return TabularDataset(self.schema, self.features, self.labels, provenance)

    def class_counts(self) -> tuple:
        n1 = int(self.labels.sum())
        return self.n_rows - n1, n1


def concat(datasets: Sequence[TabularDataset], provenance: Provenance) -> TabularDataset:
    """Row-wise concatenation; all inputs must share one schema."""
    if not datasets:
        raise ValueError("nothing to concatenate")
    schema = datasets[0].schema
    if any(d.schema != schema for d in datasets):
        raise SchemaMismatch("cannot concatenate datasets with different schemas")
    return TabularDataset(schema,
                          np.concatenate([d.features for d in datasets]),
                          np.concatenate([d.labels for d in datasets]),
                          provenance)


# --------------------------------------------------------------------------
# Random streams
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class RngStream:
    """Hierarchically labelled random stream.

    Equal ``(root_seed, path)`` pairs always yield the same sequence; each
    distinct path is an independent ``SeedSequence`` spawn key.
    """

    root_seed: int
    path: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "path", tuple(int(p) for p in self.path))
        if self.root_seed < 0 or any(p < 0 for p in self.path):
            raise ValueError("seeds and path labels must be non-negative")

    def child(self, *labels: int) -> "RngStream":
        return RngStream(self.root_seed, self.path + tuple(labels))

    def seed_sequence(self) -> np.random.SeedSequence:
        return np.random.SeedSequence(self.root_seed, spawn_key=self.path)

    def generator(self) -> np.random.Generator:
        return np.random.Generator(np.random.PCG64(self.seed_sequence()))

    def seed_int(self) -> int:
        """A 31-bit integer identifying this stream (for libraries wanting an int seed)."""
        return int(self.seed_sequence().generate_state(1, np.uint32)[0] >> 1)


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


# --------------------------------------------------------------------------
# Splits
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SplitIndex:
    train_ids: np.ndarray
    test_ids: np.ndarray
    seed: int
    train_fraction: float

    def apply(self, data: TabularDataset) -> tuple:
        return data.subset(self.train_ids), data.subset(self.test_ids)


def _n_take(n: int, fraction: float) -> int:
    return int(math.floor(n * fraction + 0.5))


def split(data: TabularDataset, train_fraction: float, seed, stratified: bool = True) -> SplitIndex:
    """Partition row ids into train/test.

    Stratified splits take ``round(fraction * n_c)`` rows of each class,
    clamped so both sides keep at least one row of that class.
    """
    if not 0.0 < train_fraction < 1.0:
        raise DegenerateSplit(f"train_fraction must be in (0, 1), got {train_fraction}")
    gen = as_generator(seed)
    seed_id = seed.seed_int() if isinstance(seed, RngStream) else int(seed) if isinstance(seed, (int, np.integer)) else -1
    n = data.n_rows
    if stratified:
        train = []
        for cls in (0, 1):
            ids = np.flatnonzero(data.labels == cls)
            if len(ids) < 2:
                raise EmptyClass(f"class {cls} has {len(ids)} rows; stratified split needs at least 2")
            k = min(max(_n_take(len(ids), train_fraction), 1), len(ids) - 1)
            train.append(gen.permutation(ids)[:k])
        train_ids = np.sort(np.concatenate(train))
    else:
        k = _n_take(n, train_fraction)
        if k <= 0 or k >= n:
            raise DegenerateSplit(f"split of {n} rows at fraction {train_fraction} leaves a side empty")
        train_ids = np.sort(gen.permutation(n)[:k])
    mask = np.ones(n, dtype=bool)
    mask[train_ids] = False
    test_ids = np.flatnonzero(mask)
    if len(test_ids) == 0:
        raise DegenerateSplit("test side is empty")
    return SplitIndex(train_ids, test_ids, seed_id, float(train_fraction))


# --------------------------------------------------------------------------
# CSV
# --------------------------------------------------------------------------


def _parse_float(s: str):
    try:
        return float(s)
    except ValueError:
        return None


def _format_float(x: float) -> str:
    return repr(float(x))


def read_csv(path, schema_hint: Optional[Schema] = None, label_name: Optional[str] = None,
             positive_label: Optional[str] = None, provenance: Provenance = Real()) -> TabularDataset:
    """Load a dataset from a UTF-8 CSV file with a header row.

    Without a hint, a column is numeric iff every cell parses as a float
    (a non-finite value in such a column is a ``ParseError``); otherwise it
    is categorical with its sorted observed levels. The label column
    defaults to the hint's label, else the last column.
    """
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as e:
        raise IoError(str(e)) from e
    if not rows:
        raise ParseError("missing header row", row=0)
    header, body = rows[0], rows[1:]
    if not body:
        raise ParseError("no data rows", row=1)
    for i, r in enumerate(body, start=2):
        if len(r) != len(header):
            raise ParseError(f"expected {len(header)} cells, found {len(r)}", row=i)
    if label_name is None:
        label_name = schema_hint.label_name if schema_hint is not None else header[-1]
    if label_name not in header:
        raise MissingLabel(f"label column {label_name!r} not found in header")
    cells = {name: [r[j] for r in body] for j, name in enumerate(header)}

    if schema_hint is not None:
        if list(header) != [c.name for c in schema_hint.feature_columns] + [schema_hint.label_name] \
                and sorted(header) != sorted(c.name for c in schema_hint.columns):
            raise SchemaMismatch(f"header {header} does not match schema columns")
        if label_name != schema_hint.label_name:
            raise SchemaMismatch("label name differs from schema hint")
        schema = schema_hint
    else:
        cols = []
        for name in header:
            values = cells[name]
            if name == label_name:
                levels = sorted(set(values))
                if len(levels) != 2:
                    raise SchemaMismatch(f"label column {name!r} must have exactly 2 levels, found {levels}")
                cols.append(Column(name, tuple(levels)))
                continue
            parsed = [_parse_float(v) for v in values]
            if all(p is not None for p in parsed):
                for i, p in enumerate(parsed):
                    if not math.isfinite(p):
                        raise ParseError(f"non-finite numeric value {values[i]!r}", row=i + 2, column=name)
                cols.append(Column(name))
            else:
                cols.append(Column(name, tuple(sorted(set(values)))))
        label_levels = next(c.levels for c in cols if c.name == label_name)
        if positive_label is None:
            positive_label = "1" if "1" in label_levels else label_levels[-1]
        feats = [c for c in cols if c.name != label_name]
        label_col = next(c for c in cols if c.name == label_name)
        schema = Schema(tuple(feats) + (label_col,), label_name, positive_label)

    feature_cols = schema.feature_columns
    X = np.empty((len(body), len(feature_cols)))
    for j, col in enumerate(feature_cols):
        values = cells[col.name]
        if col.is_categorical:
            lookup = {v: k for k, v in enumerate(col.levels)}
            for i, v in enumerate(values):
                if v not in lookup:
                    raise SchemaMismatch(f"unknown level {v!r} (row {i + 2}, column {col.name!r})")
                X[i, j] = lookup[v]
        else:
            for i, v in enumerate(values):
                p = _parse_float(v)
                if p is None or not math.isfinite(p):
                    raise ParseError(f"malformed numeric cell {v!r}", row=i + 2, column=col.name)
                X[i, j] = p
    label_levels = schema.label_column.levels
    y = np.empty(len(body), dtype=np.int64)
    for i, v in enumerate(cells[schema.label_name]):
        if v not in label_levels:
            raise SchemaMismatch(f"unknown label {v!r} (row {i + 2})")
        y[i] = 1 if v == schema.positive_label else 0
    return TabularDataset(schema, X, y, provenance)


def write_csv(data: TabularDataset, path) -> None:
    schema = data.schema
    cols = schema.feature_columns
    neg, pos = schema.negative_label, schema.positive_label
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([c.name for c in cols] + [schema.label_name])
            for x, y in zip(data.features, data.labels):
                row = [col.levels[int(v)] if col.is_categorical else _format_float(v)
                       for col, v in zip(cols, x)]
                row.append(pos if y == 1 else neg)
                w.writerow(row)
    except OSError as e:
        raise IoError(str(e)) from e
