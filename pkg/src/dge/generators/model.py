"""Class-conditional generative models: spec, fit, sample, density, persistence."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from ..errors import BadSpec, InsufficientData, SchemaMismatch, UnsupportedSchema
from ..tabular import Schema, Synthetic, TabularDataset, as_generator
from .categorical import CategoricalProduct, fit_categorical
from .kde import KernelDensity, fit_kde
from .mixture import GaussianMixture, fit_mixture

KINDS = ("gmm", "kde", "catproduct", "composite")
FORMAT = "dge.generator"
FORMAT_VERSION = 1


@dataclass(frozen=True)
class GeneratorSpec:
    """Generator class plus its complexity knob.

    ``composite`` models the numeric block with ``numeric_kind`` (gmm or
    kde) and the categorical block with a categorical product, the two
    independent given the class.
    """

    kind: str
    components_per_class: int = 1
    bandwidth_scale: float = 1.0
    dirichlet_smoothing: float = 1.0
    numeric_kind: str = "kde"
    seed: int = 0
    n_train_cap: Optional[int] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise BadSpec(f"unknown generator kind {self.kind!r}; expected one of {KINDS}")
        if self.components_per_class < 1:
            raise BadSpec("components_per_class must be >= 1")
        if not self.bandwidth_scale > 0:
            raise BadSpec("bandwidth_scale must be > 0")
        if self.dirichlet_smoothing < 0:
            raise BadSpec("dirichlet_smoothing must be >= 0")
        if self.numeric_kind not in ("gmm", "kde"):
            raise BadSpec("numeric_kind must be 'gmm' or 'kde'")
        if self.n_train_cap is not None and self.n_train_cap < 4:
            raise BadSpec("n_train_cap must be >= 4")

    @property
    def numeric_model(self) -> Optional[str]:
        if self.kind in ("gmm", "kde"):
            return self.kind
        if self.kind == "composite":
            return self.numeric_kind
        return None

    @property
    def complexity(self):
        return {"gmm": self.components_per_class, "kde": self.bandwidth_scale,
                "catproduct": self.dirichlet_smoothing}[self.numeric_model or "catproduct"]

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "GeneratorSpec":
        return cls(**d)


@dataclass(frozen=True)
class FitDiagnostics:
    log_likelihood_trace: tuple = ()
    n_iterations: int = 0
    converged: bool = True


@dataclass(frozen=True, eq=False)
class GeneratorModel:
    spec: GeneratorSpec
    schema: Schema
    class_prior: float  # P(Y = 1)
    numeric: Optional[tuple] = None  # per-class GaussianMixture / KernelDensity
    categorical: Optional[tuple] = None  # per-class CategoricalProduct
    n_train: int = 0

    def to_dict(self) -> dict:
        return {
            "format": FORMAT,
            "version": FORMAT_VERSION,
            "spec": self.spec.to_dict(),
            "schema": self.schema.to_dict(),
            "class_prior": self.class_prior,
            "n_train": self.n_train,
            "numeric": None if self.numeric is None else [b.to_dict() for b in self.numeric],
            "categorical": None if self.categorical is None else [b.to_dict() for b in self.categorical],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GeneratorModel":
        if d.get("format") != FORMAT or d.get("version") != FORMAT_VERSION:
            raise SchemaMismatch("not a version-1 generator document")
        spec = GeneratorSpec.from_dict(d["spec"])
        block = {"gmm": GaussianMixture, "kde": KernelDensity}.get(spec.numeric_model)
        numeric = None if d["numeric"] is None else tuple(block.from_dict(b) for b in d["numeric"])
        categorical = None if d["categorical"] is None else tuple(
            CategoricalProduct.from_dict(b) for b in d["categorical"])
        return cls(spec, Schema.from_dict(d["schema"]), float(d["class_prior"]), numeric,
                   categorical, int(d["n_train"]))


def dumps(model: GeneratorModel) -> str:
    return json.dumps(model.to_dict(), indent=1)


def loads(text: str) -> GeneratorModel:
    return GeneratorModel.from_dict(json.loads(text))


def _check_schema(spec: GeneratorSpec, schema: Schema):
    has_num = bool(schema.numeric_idx)
    has_cat = bool(schema.categorical_idx)
    if spec.kind in ("gmm", "kde") and (has_cat or not has_num):
        raise UnsupportedSchema(f"{spec.kind} needs an all-numeric schema; use 'composite' for mixed data")
    if spec.kind == "catproduct" and (has_num or not has_cat):
        raise UnsupportedSchema("catproduct needs an all-categorical schema")
    if spec.kind == "composite" and not (has_num and has_cat):
        raise UnsupportedSchema("composite needs both numeric and categorical columns")


def _cap_rows(train: TabularDataset, cap: int, gen: np.random.Generator) -> TabularDataset:
    """Stratified random subset of at most ``cap`` rows."""
    n = train.n_rows
    if cap >= n:
        return train
    keep = []
    for cls in (0, 1):
        ids = np.flatnonzero(train.labels == cls)
        k = max(2, int(round(cap * len(ids) / n)))
        keep.append(gen.permutation(ids)[:min(k, len(ids))])
    return train.subset(np.sort(np.concatenate(keep)))


def fit(spec: GeneratorSpec, train: TabularDataset, rng) -> tuple:
    """Fit one class-conditional generator; returns ``(model, diagnostics)``."""
    schema = train.schema
    _check_schema(spec, schema)
    gen = as_generator(rng)
    if spec.n_train_cap is not None:
        train = _cap_rows(train, spec.n_train_cap, gen)
    need = 2 * spec.components_per_class if spec.numeric_model == "gmm" else 2
    n0, n1 = train.class_counts()
    if min(n0, n1) < need:
        raise InsufficientData(f"need at least {need} rows per class, have {n0} and {n1}")

    num_idx, cat_idx = schema.numeric_idx, schema.categorical_idx
    n_levels = [len(schema.feature_columns[j].levels) for j in cat_idx]
    numeric, categorical, traces = [], [], []
    diag = FitDiagnostics()
    for cls in (0, 1):
        rows = train.features[train.labels == cls]
        if spec.numeric_model == "kde":
            boot = gen.integers(len(rows), size=len(rows))
            numeric.append(fit_kde(rows[:, num_idx], spec.bandwidth_scale, boot))
            # the categorical block sees the same resampled rows
            rows = rows[boot]
        elif spec.numeric_model == "gmm":
            gm, trace, n_iter, conv = fit_mixture(rows[:, num_idx], spec.components_per_class, gen)
            numeric.append(gm)
            traces.append((len(rows), trace, n_iter, conv))
        if cat_idx:
            categorical.append(fit_categorical(rows[:, cat_idx], n_levels, spec.dirichlet_smoothing))

    if traces:
        length = max(len(t[1]) for t in traces)
        total = sum(t[0] for t in traces)
        padded = [np.r_[t[1], np.full(length - len(t[1]), t[1][-1])] for t in traces]
        trace = sum(t[0] / total * p for t, p in zip(traces, padded))
        diag = FitDiagnostics(tuple(float(v) for v in trace), max(t[2] for t in traces),
                              all(t[3] for t in traces))

    model = GeneratorModel(
        spec=spec,
        schema=schema,
        class_prior=float(train.labels.mean()),
        numeric=tuple(numeric) if numeric else None,
        categorical=tuple(categorical) if categorical else None,
        n_train=train.n_rows,
    )
    return model, diag


def sample(model: GeneratorModel, n: int, rng) -> TabularDataset:
    """Draw ``n`` iid rows: ``y ~ Bernoulli(prior)``, then ``x ~ p(x | y)``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    gen = as_generator(rng)
    schema = model.schema
    y = (gen.random(n) < model.class_prior).astype(np.int64)
    X = np.empty((n, len(schema.feature_columns)))
    num_idx, cat_idx = schema.numeric_idx, schema.categorical_idx
    for cls in (0, 1):
        idx = np.flatnonzero(y == cls)
        if len(idx) == 0:
            continue
        if model.numeric is not None:
            X[np.ix_(idx, num_idx)] = model.numeric[cls].sample(len(idx), gen)
        if model.categorical is not None:
            X[np.ix_(idx, cat_idx)] = model.categorical[cls].sample(len(idx), gen)
    return TabularDataset(schema, X, y, Synthetic(model.spec.seed, model.spec.kind))


def log_density(model: GeneratorModel, x, y) -> np.ndarray:
    """``log p(x, y)`` for one row or a batch of rows (categoricals as level codes)."""
    X = np.atleast_2d(np.asarray(x, dtype=np.float64))
    y = np.broadcast_to(np.asarray(y, dtype=np.int64), (X.shape[0],))
    schema = model.schema
    if X.shape[1] != len(schema.feature_columns):
        raise UnsupportedSchema("row does not match the model schema")
    out = np.where(y == 1, np.log(model.class_prior), np.log1p(-model.class_prior))
    for cls in (0, 1):
        idx = y == cls
        if not idx.any():
            continue
        if model.numeric is not None:
            out[idx] += model.numeric[cls].logpdf(X[np.ix_(idx, schema.numeric_idx)])
        if model.categorical is not None:
            out[idx] += model.categorical[cls].logpdf(X[np.ix_(idx, schema.categorical_idx)])
    return out if np.ndim(x) > 1 else out[0]
