from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class CategoricalProduct:
    """Independent per-column category frequencies."""

    freqs: tuple  # one probability vector per categorical column

    def logpdf(self, codes: np.ndarray) -> np.ndarray:
        codes = np.atleast_2d(codes).astype(np.int64)
        with np.errstate(divide="ignore"):
            return sum(np.log(f[codes[:, j]]) for j, f in enumerate(self.freqs))

    def sample(self, n: int, gen: np.random.Generator) -> np.ndarray:
        return np.column_stack([gen.choice(len(f), size=n, p=f) for f in self.freqs]).astype(np.float64)

    def to_dict(self) -> dict:
        return {"freqs": [f.tolist() for f in self.freqs]}

    @classmethod
    def from_dict(cls, d: dict) -> "CategoricalProduct":
        return cls(tuple(np.asarray(f, float) for f in d["freqs"]))


def fit_categorical(codes: np.ndarray, n_levels, alpha: float) -> CategoricalProduct:
    """Additively smoothed frequencies ``(count + alpha) / (n + alpha * L)``."""
    freqs = []
    for j, L in enumerate(n_levels):
        counts = np.bincount(codes[:, j].astype(np.int64), minlength=L).astype(np.float64)
        f = (counts + alpha) / (counts.sum() + alpha * L)
        freqs.append(f / f.sum())
    return CategoricalProduct(tuple(freqs))
