"""Metrics, Monte Carlo aggregation, cross-dataset evaluation, ranking and UQ summaries."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence, Union

import numpy as np
from scipy.stats import rankdata

from .classifiers import ClassifierModel, EnsemblePredictor, ensemble_predict, predict_label, predict_proba
from .errors import DimensionError, InsufficientDatasets, InsufficientSamples, SingleClass
from .tabular import Synthetic, TabularDataset, concat

METRICS = ("auc", "accuracy")


# --------------------------------------------------------------------------
# Metrics
# --------------------------------------------------------------------------


def auc(scores, labels) -> float:
    """Area under the ROC curve as the normalised Mann-Whitney U statistic.

    A positive/negative pair counts 1 when the positive scores higher and
    0.5 when the scores tie.
    """
    s = np.asarray(scores, dtype=np.float64).ravel()
    y = np.asarray(labels).ravel()
    if s.shape != y.shape:
        raise ValueError("scores and labels differ in length")
    pos = y == 1
    n_pos = int(pos.sum())
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClass("AUC needs both classes in the labels")
    ranks = rankdata(s, method="average")
    # U counts pairs; rank sums of halves stay exact in float64
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def accuracy(probs, labels) -> float:
    """Fraction correct after thresholding at 0.5 (an exact 0.5 predicts 0)."""
    y = np.asarray(labels).ravel()
    return float(np.mean(predict_label(np.asarray(probs).ravel()) == y))


def score(probs, labels, metric: str) -> float:
    if metric == "auc":
        return auc(probs, labels)
    if metric == "accuracy":
        return accuracy(probs, labels)
    raise ValueError(f"unknown metric {metric!r}; expected one of {METRICS}")


# --------------------------------------------------------------------------
# Monte Carlo statistics over the K draws
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class StatisticSamples:
    """K draws of a downstream statistic, one per synthetic dataset."""

    values: tuple
    statistic_name: str = "statistic"

    def __post_init__(self):
        vals = tuple(float(v) for v in np.asarray(self.values, dtype=np.float64).ravel())
        if not vals:
            raise InsufficientSamples("need at least one sample")
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("sample values must be finite")
        object.__setattr__(self, "values", vals)

    @property
    def K(self) -> int:
        return len(self.values)


def mc_stats(samples: StatisticSamples, require_variance: bool = True) -> tuple:
    """``(mean, variance)`` with the ``1/(K-1)`` variance normaliser.

    With a single sample the variance is undefined: this raises
    ``InsufficientSamples``, or returns ``None`` for it when
    ``require_variance`` is false.
    """
    v = np.asarray(samples.values)
    K = len(v)
    # shifting by the first value keeps the mean of equal values exact
    mean = v[0] + math.fsum(v - v[0]) / K
    if K < 2:
        if require_variance:
            raise InsufficientSamples("variance needs at least two samples")
        return float(mean), None
    var = math.fsum((v - mean) ** 2) / (K - 1)
    return float(mean), var


@dataclass(frozen=True)
class EvalReport:
    """One approach's metric across runs (std uses the ``1/(n-1)`` normaliser)."""

    approach: str
    metric: str
    mean: float
    std: float
    values: tuple

    @classmethod
    def from_values(cls, approach: str, metric: str, values: Sequence[float]) -> "EvalReport":
        vals = tuple(float(v) for v in values)
        mean, var = mc_stats(StatisticSamples(vals, metric), require_variance=False)
        # clamp so that float rounding never puts the mean outside the data
        mean = min(max(mean, min(vals)), max(vals))
        return cls(approach, metric, mean, math.sqrt(var) if var is not None else 0.0, vals)

    def to_dict(self) -> dict:
        return {"approach": self.approach, "metric": self.metric, "mean": self.mean,
                "std": self.std, "values": list(self.values)}


Predictor = Union[ClassifierModel, EnsemblePredictor]


def predictor_proba(model: Predictor, x) -> np.ndarray:
    if isinstance(model, EnsemblePredictor):
        return ensemble_predict(model, x)[0]
    return predict_proba(model, x)


def evaluate_model(model: Predictor, test: TabularDataset, metric: str = "auc") -> float:
    return score(predictor_proba(model, test), test.labels, metric)


# --------------------------------------------------------------------------
# Cross-dataset evaluation
# --------------------------------------------------------------------------


def cross_plan(K: int, k_prime: int) -> list:
    """Foreign test-set indices per model: the next ``k_prime`` sets cyclically.

    Cyclic offsets make every set serve as a foreign test set exactly
    ``k_prime`` times in total.
    """
    if K < 2:
        raise InsufficientDatasets("cross-dataset evaluation needs at least two datasets")
    if not 1 <= k_prime <= K - 1:
        raise InsufficientDatasets(f"K'={k_prime} must lie in [1, {K - 1}] for K={K}")
    return [[(k + i) % K for i in range(1, k_prime + 1)] for k in range(K)]


def cross_dataset_eval(models: Sequence[ClassifierModel], test_sets: Sequence[TabularDataset],
                       mode: str = "naive", k_prime: Optional[int] = None,
                       metric: str = "auc") -> StatisticSamples:
    """Score model k on its own test set (``naive``) or on the pooled
    foreign test sets (``dge_cross``, ``k_prime`` of them, default K-1)."""
    K = len(models)
    if K != len(test_sets):
        raise ValueError("need one test set per model")
    if K < 1:
        raise InsufficientDatasets("no models to evaluate")
    if mode == "naive":
        vals = [evaluate_model(m, t, metric) for m, t in zip(models, test_sets)]
        return StatisticSamples(tuple(vals), f"naive_{metric}")
    if mode != "dge_cross":
        raise ValueError(f"unknown mode {mode!r}; expected 'naive' or 'dge_cross'")
    plan = cross_plan(K, K - 1 if k_prime is None else k_prime)
    vals = []
    for k, others in enumerate(plan):
        pooled = concat([test_sets[i] for i in others], Synthetic(-1, "pooled"))
        vals.append(evaluate_model(models[k], pooled, metric))
    return StatisticSamples(tuple(vals), f"dge_cross{len(plan[0])}_{metric}")


# --------------------------------------------------------------------------
# Ranking
# --------------------------------------------------------------------------


def descending_ranks(values) -> np.ndarray:
    """Rank 1 for the largest value; ties share their average rank."""
    return rankdata(-np.asarray(values, dtype=np.float64), method="average")


def spearman(a, b) -> float:
    """Pearson correlation of average ranks; ``nan`` when either side is constant."""
    ra = rankdata(np.asarray(a, dtype=np.float64), method="average")
    rb = rankdata(np.asarray(b, dtype=np.float64), method="average")
    if len(ra) != len(rb) or len(ra) < 2:
        raise ValueError("need two equal-length sequences of at least 2 values")
    da, db = ra - ra.mean(), rb - rb.mean()
    denom = math.sqrt(float(da @ da) * float(db @ db))
    if denom == 0.0:
        return float("nan")
    return float(da @ db) / denom


@dataclass(frozen=True)
class RankingReport:
    names: tuple
    means: tuple
    ranks: tuple
    reference_ranks: tuple
    spearman: float

    def to_dict(self) -> dict:
        return {"names": list(self.names), "means": list(self.means), "ranks": list(self.ranks),
                "reference_ranks": list(self.reference_ranks), "spearman": self.spearman}


def rank_models(candidates: Mapping[str, Union[StatisticSamples, float]],
                reference: Mapping[str, float]) -> RankingReport:
    """Rank model classes by descending mean and correlate with the reference ranking."""
    names = tuple(candidates)
    if len(names) < 2:
        raise ValueError("ranking needs at least two model classes")
    if set(names) != set(reference):
        raise ValueError("candidate and reference model classes differ")
    means = []
    for n in names:
        c = candidates[n]
        means.append(mc_stats(c, require_variance=False)[0] if isinstance(c, StatisticSamples) else float(c))
    ref = [float(reference[n]) for n in names]
    ranks = descending_ranks(means)
    ref_ranks = descending_ranks(ref)
    return RankingReport(names, tuple(means), tuple(float(r) for r in ranks),
                         tuple(float(r) for r in ref_ranks), spearman(means, ref))


# --------------------------------------------------------------------------
# Confidence-accuracy curves
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class CurveSeries:
    """Accuracy on rows whose confidence exceeds each threshold; ``None`` marks an empty selection."""

    thresholds: tuple
    accuracy: tuple
    coverage: tuple
    n_selected: tuple = ()

    def to_dict(self) -> dict:
        return {"thresholds": list(self.thresholds), "accuracy": list(self.accuracy),
                "coverage": list(self.coverage), "n_selected": list(self.n_selected)}


def confidence(p) -> np.ndarray:
    """Probability of the predicted label, ``max(p, 1 - p)``."""
    p = np.asarray(p, dtype=np.float64)
    return np.maximum(p, 1.0 - p)


def confidence_accuracy_curve(probs, labels, thresholds: Sequence[float]) -> CurveSeries:
    """``probs`` is a per-row probability vector or a ``K x rows`` member matrix (averaged)."""
    p = np.asarray(probs, dtype=np.float64)
    if p.ndim == 2:
        p = p.mean(axis=0)
    y = np.asarray(labels).ravel()
    if p.shape != y.shape:
        raise ValueError("probabilities and labels differ in length")
    taus = tuple(float(t) for t in thresholds)
    if any(not 0.5 <= t < 1.0 for t in taus) or list(taus) != sorted(taus):
        raise ValueError("thresholds must be ascending within [0.5, 1)")
    conf = confidence(p)
    correct = predict_label(p) == y
    accs, covs, counts = [], [], []
    for t in taus:
        sel = conf > t
        n = int(sel.sum())
        counts.append(n)
        covs.append(n / len(y))
        accs.append(float(correct[sel].mean()) if n else None)
    return CurveSeries(taus, tuple(accs), tuple(covs), tuple(counts))


# --------------------------------------------------------------------------
# Uncertainty over a 2-D grid
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class UncertaintyGrid:
    xs: np.ndarray
    ys: np.ndarray
    mean: np.ndarray  # (len(ys), len(xs))
    std: np.ndarray
    boundary: tuple = ()  # polylines, each an (m, 2) array where mean = 0.5
    feature_names: tuple = ("x1", "x2")

    @property
    def mean_std(self) -> float:
        return float(self.std.mean())

    def to_dict(self) -> dict:
        return {"feature_names": list(self.feature_names), "xs": self.xs.tolist(),
                "ys": self.ys.tolist(), "mean": self.mean.tolist(), "std": self.std.tolist(),
                "boundary": [line.tolist() for line in self.boundary],
                "mean_std": self.mean_std}


def decision_boundary(xs, ys, mean, level: float = 0.5) -> tuple:
    """Marching-squares level set of ``mean`` (shape ``(len(ys), len(xs))``)."""
    from contourpy import contour_generator

    gen = contour_generator(x=np.asarray(xs), y=np.asarray(ys), z=np.asarray(mean))
    return tuple(np.asarray(line) for line in gen.lines(level))


def uncertainty_grid(ens: EnsemblePredictor, bbox: Sequence[float],
                     resolution: Union[int, Sequence[int]] = 50) -> UncertaintyGrid:
    """Member mean and population std of P(Y=1) over a regular grid.

    ``bbox`` is ``(xmin, xmax, ymin, ymax)`` in the two numeric features.
    """
    schema = ens.schema
    cols = schema.feature_columns
    if len(cols) != 2 or any(c.is_categorical for c in cols):
        raise DimensionError(f"uncertainty grids need exactly two numeric features, schema has {len(cols)}")
    nx, ny = (resolution, resolution) if np.ndim(resolution) == 0 else tuple(resolution)
    if nx < 2 or ny < 2:
        raise ValueError("resolution must be >= 2 per axis")
    xmin, xmax, ymin, ymax = (float(v) for v in bbox)
    if not (xmin < xmax and ymin < ymax):
        raise ValueError("bbox must be (xmin, xmax, ymin, ymax) with min < max")
    xs = np.linspace(xmin, xmax, nx)
    ys = np.linspace(ymin, ymax, ny)
    gx, gy = np.meshgrid(xs, ys)
    pts = np.column_stack([gx.ravel(), gy.ravel()])
    mean, members = ensemble_predict(ens, pts)
    std = members.std(axis=0)
    mean = mean.reshape(ny, nx)
    std = std.reshape(ny, nx)
    return UncertaintyGrid(xs, ys, mean, std, decision_boundary(xs, ys, mean),
                           tuple(c.name for c in cols))


# --------------------------------------------------------------------------
# Minority subgroups
# --------------------------------------------------------------------------

MIN_SHARE = 0.005
MAX_SHARE = 0.20
TOP_FRACTION = 0.10


@dataclass(frozen=True)
class SubgroupDef:
    """``category``: rows whose feature equals ``level``; ``top_decile``: rows with value >= ``threshold``."""

    feature: str
    rule: str
    fraction: float
    level: Optional[str] = None
    threshold: Optional[float] = None

    @property
    def label(self) -> str:
        if self.rule == "category":
            return f"{self.feature}={self.level}"
        return f"{self.feature}>={self.threshold:.6g}"

    def mask(self, data: TabularDataset) -> np.ndarray:
        j = data.schema.feature_names.index(self.feature)
        col = data.schema.feature_columns[j]
        x = data.features[:, j]
        if self.rule == "category":
            return x == col.levels.index(self.level)
        return x >= self.threshold

    def to_dict(self) -> dict:
        return {"feature": self.feature, "rule": self.rule, "fraction": self.fraction,
                "level": self.level, "threshold": self.threshold, "label": self.label}


def minority_subgroups(data: TabularDataset, numeric: bool = True) -> list:
    """One subgroup per qualifying feature.

    Categorical: the smallest level whose share lies strictly between
    0.5% and 20% (lowest level index on ties); skipped if none. Numeric
    (when ``numeric``): rows at or above the smallest value of the top
    decile, i.e. the value at sorted position ``n - ceil(n/10)``.
    """
    n = data.n_rows
    out = []
    for j, col in enumerate(data.schema.feature_columns):
        x = data.features[:, j]
        if col.is_categorical:
            counts = np.bincount(x.astype(np.int64), minlength=len(col.levels))
            best = None
            for code, c in enumerate(counts):
                share = c / n
                if MIN_SHARE < share < MAX_SHARE and (best is None or c < counts[best]):
                    best = code
            if best is not None:
                out.append(SubgroupDef(col.name, "category", float(counts[best] / n), level=col.levels[best]))
        elif numeric:
            k = math.ceil(TOP_FRACTION * n)
            threshold = float(np.sort(x)[n - k])
            out.append(SubgroupDef(col.name, "top_decile", float(np.mean(x >= threshold)),
                                   threshold=threshold))
    return out


@dataclass(frozen=True)
class SubgroupReport:
    """Per-subgroup accuracy per approach, and accuracy minus the oracle model's."""

    subgroup: SubgroupDef
    n_rows: tuple  # per run
    accuracy: Mapping[str, EvalReport] = field(default_factory=dict)
    relative: Mapping[str, EvalReport] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"subgroup": self.subgroup.to_dict(), "n_rows": list(self.n_rows),
                "accuracy": {k: v.to_dict() for k, v in self.accuracy.items()},
                "relative": {k: v.to_dict() for k, v in self.relative.items()}}
