"""Downstream classifiers and the mean-aggregating ensemble."""
from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Any, Optional, Sequence

import numpy as np

from ..errors import BadSpec, SchemaMismatch, SingleClassTrainingSet
from ..tabular import RngStream, Schema, TabularDataset, as_generator
from .knn import knn_proba
from .linear import logreg_proba, train_logreg
from .mlp import predict as mlp_predict
from .mlp import train_mlp

KINDS = ("logreg", "knn", "mlp", "deep_mlp", "forest")
DEEP_MLP_HIDDEN = (100, 100, 100)


@dataclass(frozen=True)
class ClassifierSpec:
    kind: str = "mlp"
    hidden: tuple = (100, 100)
    k: int = 5
    n_trees: int = 100
    min_leaf: int = 2
    learning_rate: float = 1e-3
    l2: float = 1e-4
    epochs: int = 200
    batch_size: int = 128
    max_steps: int = 10_000
    name: Optional[str] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise BadSpec(f"unknown classifier kind {self.kind!r}; expected one of {KINDS}")
        if self.kind == "deep_mlp" and tuple(self.hidden) == (100, 100):
            object.__setattr__(self, "hidden", DEEP_MLP_HIDDEN)
        object.__setattr__(self, "hidden", tuple(int(w) for w in self.hidden))
        if any(w < 1 for w in self.hidden) or not self.hidden:
            raise BadSpec("hidden widths must be >= 1")
        if self.k < 1 or self.n_trees < 1 or self.min_leaf < 1:
            raise BadSpec("k, n_trees and min_leaf must be >= 1")
        if not self.learning_rate > 0 or self.l2 < 0:
            raise BadSpec("learning_rate must be > 0 and l2 >= 0")
        if self.epochs < 1 or self.batch_size < 1:
            raise BadSpec("epochs and batch_size must be >= 1")

    @property
    def label(self) -> str:
        if self.name:
            return self.name
        if self.kind in ("mlp", "deep_mlp"):
            return f"{self.kind}{list(self.hidden)}"
        if self.kind == "knn":
            return f"knn{self.k}"
        if self.kind == "forest":
            return f"forest{self.n_trees}"
        return self.kind

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ClassifierSpec":
        d = dict(d)
        if "hidden" in d:
            d["hidden"] = tuple(d["hidden"])
        return cls(**d)


@dataclass(frozen=True, eq=False)
class Encoder:
    """Standardises numeric columns and one-hot encodes categoricals."""

    schema: Schema
    means: np.ndarray
    stds: np.ndarray
    standardize: bool = True

    @classmethod
    def fit(cls, data: TabularDataset, standardize: bool = True) -> "Encoder":
        X = data.features[:, data.schema.numeric_idx]
        means = X.mean(axis=0) if X.size else np.zeros(0)
        stds = X.std(axis=0) if X.size else np.zeros(0)
        stds = np.where(stds > 0, stds, 1.0)
        return cls(data.schema, means, stds, standardize)

    @property
    def width(self) -> int:
        cols = self.schema.feature_columns
        return sum(len(c.levels) if c.is_categorical else 1 for c in cols)

    def transform(self, features: np.ndarray) -> np.ndarray:
        blocks = []
        num_pos = 0
        for j, col in enumerate(self.schema.feature_columns):
            x = features[:, j]
            if col.is_categorical:
                blocks.append(np.eye(len(col.levels))[x.astype(np.int64)])
            else:
                if self.standardize:
                    x = (x - self.means[num_pos]) / self.stds[num_pos]
                num_pos += 1
                blocks.append(x[:, None])
        return np.hstack(blocks)


@dataclass(frozen=True, eq=False)
class ClassifierModel:
    spec: ClassifierSpec
    encoder: Encoder
    params: Any
    history: tuple = ()

    @property
    def schema(self) -> Schema:
        return self.encoder.schema


def _features_of(model_schema: Schema, x) -> np.ndarray:
    if isinstance(x, TabularDataset):
        if x.schema.feature_columns != model_schema.feature_columns:
            raise SchemaMismatch("dataset schema differs from the training schema")
        return x.features
    X = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if X.shape[1] != len(model_schema.feature_columns):
        raise SchemaMismatch(f"expected {len(model_schema.feature_columns)} feature columns, got {X.shape[1]}")
    return X


def train_classifier(spec: ClassifierSpec, train: TabularDataset, rng) -> ClassifierModel:
    n0, n1 = train.class_counts()
    if n0 == 0 or n1 == 0:
        raise SingleClassTrainingSet("training set contains a single class")
    y = train.labels
    if spec.kind == "forest":
        from sklearn.ensemble import RandomForestClassifier

        enc = Encoder.fit(train, standardize=False)
        seed = rng.seed_int() if isinstance(rng, RngStream) else int(as_generator(rng).integers(2**31))
        forest = RandomForestClassifier(
            n_estimators=spec.n_trees, criterion="gini", max_features="sqrt",
            min_samples_leaf=spec.min_leaf, bootstrap=True, random_state=seed, n_jobs=1)
        forest.fit(enc.transform(train.features), y)
        return ClassifierModel(spec, enc, forest)

    enc = Encoder.fit(train)
    X = enc.transform(train.features)
    if spec.kind == "logreg":
        w, b, steps = train_logreg(X, y, l2=spec.l2, max_steps=spec.max_steps)
        return ClassifierModel(spec, enc, (w, b), (steps,))
    if spec.kind == "knn":
        return ClassifierModel(spec, enc, (X, y.astype(np.float64)))
    gen = as_generator(rng)
    params, history = train_mlp(X, y, spec.hidden, gen, learning_rate=spec.learning_rate,
                                l2=spec.l2, epochs=spec.epochs, batch_size=spec.batch_size)
    return ClassifierModel(spec, enc, params, tuple(history))


def predict_proba(model: ClassifierModel, x) -> np.ndarray:
    """Per-row P(Y = 1); ``x`` is a dataset or an ``(n, p)`` feature array."""
    X = model.encoder.transform(_features_of(model.schema, x))
    kind = model.spec.kind
    if kind == "logreg":
        p = logreg_proba(*model.params, X)
    elif kind == "knn":
        p = knn_proba(model.params[0], model.params[1], X, model.spec.k)
    elif kind == "forest":
        proba = model.params.predict_proba(X)
        p = proba[:, list(model.params.classes_).index(1)]
    else:
        p = mlp_predict(model.params, X)
    return np.clip(p, 0.0, 1.0)


def predict_label(p: np.ndarray) -> np.ndarray:
    """Threshold at 0.5; an exact 0.5 predicts the negative class."""
    return (np.asarray(p) > 0.5).astype(np.int64)


@dataclass(frozen=True, eq=False)
class EnsemblePredictor:
    members: tuple

    def __post_init__(self):
        object.__setattr__(self, "members", tuple(self.members))
        if not self.members:
            raise ValueError("an ensemble needs at least one member")

    @property
    def schema(self) -> Schema:
        return self.members[0].schema


def ensemble_predict(ens: EnsemblePredictor, x) -> tuple:
    """Returns ``(mean probability per row, K x rows member matrix)``."""
    member_probs = np.vstack([predict_proba(m, x) for m in ens.members])
    return member_probs.mean(axis=0), member_probs


def ensemble_of(models: Sequence[ClassifierModel]) -> EnsemblePredictor:
    return EnsemblePredictor(tuple(models))
