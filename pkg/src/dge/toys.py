"""Deterministic toy datasets.

Each generator is a pure function of its :class:`ToySpec`; rows are
shuffled with the spec's seed so class order carries no information.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import BadSpec
from .tabular import Column, Schema, TabularDataset

KINDS = ("moons", "circles", "gaussian", "minority")
DEFAULT_NOISE = {"moons": 0.1, "circles": 0.05, "gaussian": 0.0, "minority": 0.0}


@dataclass(frozen=True)
class ToySpec:
    kind: str
    n: int
    noise: Optional[float] = None
    seed: int = 0
    # minority toy only
    minority_share: float = 0.05
    minority_shift: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise BadSpec(f"unknown toy kind {self.kind!r}; expected one of {KINDS}")
        if self.n < 2:
            raise BadSpec("toy datasets need n >= 2")
        if self.noise is None:
            object.__setattr__(self, "noise", DEFAULT_NOISE[self.kind])
        if self.noise < 0:
            raise BadSpec("noise must be >= 0")
        if not 0.0 < self.minority_share < 1.0:
            raise BadSpec("minority_share must be in (0, 1)")


XY_SCHEMA = Schema.build([Column("x1"), Column("x2")])


def _check(spec: ToySpec, kind: str):
    if spec.kind != kind:
        raise BadSpec(f"expected a {kind!r} spec, got {spec.kind!r}")


def _finish(spec: ToySpec, X: np.ndarray, y: np.ndarray, gen: np.random.Generator,
            schema: Schema = XY_SCHEMA) -> TabularDataset:
    perm = gen.permutation(len(y))
    return TabularDataset(schema, X[perm], y[perm])


def _class_sizes(n: int) -> tuple:
    return (n + 1) // 2, n // 2


def gen_two_moons(spec: ToySpec) -> TabularDataset:
    """Interleaved half circles.

    Class 0 lies on the upper unit half circle centred at the origin; class 1
    on the lower unit half circle centred at (1, 0.5), i.e. the points
    ``(1 - cos t, 0.5 - sin t)``. Angles are evenly spaced on [0, pi].
    """
    _check(spec, "moons")
    gen = np.random.default_rng(spec.seed)
    n0, n1 = _class_sizes(spec.n)
    t0 = np.linspace(0.0, np.pi, n0)
    t1 = np.linspace(0.0, np.pi, n1)
    upper = np.column_stack([np.cos(t0), np.sin(t0)])
    lower = np.column_stack([1.0 - np.cos(t1), 0.5 - np.sin(t1)])
    X = np.vstack([upper, lower])
    y = np.r_[np.zeros(n0, np.int64), np.ones(n1, np.int64)]
    if spec.noise > 0:
        X = X + gen.normal(scale=spec.noise, size=X.shape)
    return _finish(spec, X, y, gen)


def gen_circles(spec: ToySpec) -> TabularDataset:
    """Class 0 on the unit circle, class 1 on the circle of radius 0.5."""
    _check(spec, "circles")
    gen = np.random.default_rng(spec.seed)
    n0, n1 = _class_sizes(spec.n)
    t0 = np.linspace(0.0, 2 * np.pi, n0, endpoint=False)
    t1 = np.linspace(0.0, 2 * np.pi, n1, endpoint=False)
    X = np.vstack([np.column_stack([np.cos(t0), np.sin(t0)]),
                   0.5 * np.column_stack([np.cos(t1), np.sin(t1)])])
    y = np.r_[np.zeros(n0, np.int64), np.ones(n1, np.int64)]
    if spec.noise > 0:
        X = X + gen.normal(scale=spec.noise, size=X.shape)
    return _finish(spec, X, y, gen)


def ramp(x):
    """Piecewise-linear link: 0 below 0, 1 above 2, x/2 in between."""
    return np.clip(np.asarray(x, dtype=np.float64) / 2.0, 0.0, 1.0)


def gaussian_toy_prob(x1):
    """P(Y=1 | x) for the Gaussian toy; depends on x1 only."""
    return ramp(np.asarray(x1) + 1.0)


def gen_gaussian_toy(spec: ToySpec) -> TabularDataset:
    _check(spec, "gaussian")
    gen = np.random.default_rng(spec.seed)
    X = gen.standard_normal((spec.n, 2))
    y = (gen.random(spec.n) < gaussian_toy_prob(X[:, 0])).astype(np.int64)
    return TabularDataset(XY_SCHEMA, X, y)


MINORITY_SCHEMA = Schema.build([Column("x1"), Column("x2"), Column("group", ("A", "B"))])


def minority_toy_prob(x1, group, shift: float = 1.0):
    """Group A follows the Gaussian toy; group B's boundary sits at x1 = -shift."""
    x1 = np.asarray(x1, dtype=np.float64)
    return np.where(np.asarray(group) == 1, ramp(x1 + 1.0 + shift), ramp(x1 + 1.0))


def gen_minority_toy(spec: ToySpec) -> TabularDataset:
    """Mixed-type Gaussian toy with a small categorical group whose boundary is shifted."""
    _check(spec, "minority")
    gen = np.random.default_rng(spec.seed)
    X = gen.standard_normal((spec.n, 2))
    group = (gen.random(spec.n) < spec.minority_share).astype(np.float64)
    p = minority_toy_prob(X[:, 0], group, spec.minority_shift)
    y = (gen.random(spec.n) < p).astype(np.int64)
    return TabularDataset(MINORITY_SCHEMA, np.column_stack([X, group]), y)


def gen_toy(spec: ToySpec) -> TabularDataset:
    return {
        "moons": gen_two_moons,
        "circles": gen_circles,
        "gaussian": gen_gaussian_toy,
        "minority": gen_minority_toy,
    }[spec.kind](spec)
