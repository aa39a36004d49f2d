from __future__ import annotations

import numpy as np


def knn_proba(train_X: np.ndarray, train_y: np.ndarray, X: np.ndarray, k: int,
              chunk_bytes: int = 32 * 2**20) -> np.ndarray:
    """Fraction of positive labels among the k nearest training rows.

    Distances are computed from explicit differences so a training row is
    at distance exactly 0 from itself. Equal distances are broken in favour
    of the lowest training row index.
    """
    n, d = train_X.shape
    k = min(k, n)
    train_y = np.asarray(train_y, dtype=np.float64)
    rows = max(1, chunk_bytes // (8 * n * max(d, 1)))
    out = np.empty(X.shape[0])
    for s in range(0, X.shape[0], rows):
        D = ((X[s:s + rows, None, :] - train_X[None, :, :]) ** 2).sum(axis=2)
        kth = np.partition(D, k - 1, axis=1)[:, k - 1:k]
        less = D < kth
        n_less = less.sum(axis=1, keepdims=True)
        equal = D == kth
        # take the lowest-index ties until k neighbours are filled
        chosen = less | (equal & (np.cumsum(equal, axis=1) <= k - n_less))
        out[s:s + rows] = (chosen * train_y).sum(axis=1) / k
    return out
