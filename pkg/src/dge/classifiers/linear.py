from __future__ import annotations

import numpy as np

from ..errors import NonFiniteLoss


def logreg_loss_grad(w, b, X, y, l2):
    z = X @ w + b
    loss = float(np.mean(np.logaddexp(0.0, z) - y * z) + 0.5 * l2 * w @ w)
    r = (0.5 * (1.0 + np.tanh(0.5 * z)) - y) / len(y)
    return loss, X.T @ r + l2 * w, float(r.sum())


def train_logreg(X, y, l2=1e-4, max_steps=10_000, tol=1e-6):
    """Gradient descent with step ``1/L`` on L2-regularised cross-entropy.

    ``L = lambda_max([X 1]^T [X 1]) / (4 n) + l2`` bounds the Hessian, so
    the fixed step is a descent step. Stops once the gradient norm < ``tol``.
    """
    y = np.asarray(y, dtype=np.float64)
    n, d = X.shape
    A = np.column_stack([X, np.ones(n)])
    L = np.linalg.eigvalsh(A.T @ A / n).max() / 4.0 + l2
    step = 1.0 / L
    w = np.zeros(d)
    b = 0.0
    steps = 0
    for steps in range(1, max_steps + 1):
        loss, gw, gb = logreg_loss_grad(w, b, X, y, l2)
        if not np.isfinite(loss):
            raise NonFiniteLoss("logistic regression loss is not finite")
        if np.sqrt(gw @ gw + gb * gb) < tol:
            break
        w -= step * gw
        b -= step * gb
    return w, b, steps


def logreg_proba(w, b, X):
    return 0.5 * (1.0 + np.tanh(0.5 * (X @ w + b)))
