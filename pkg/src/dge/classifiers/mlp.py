"""ReLU multilayer perceptron with a sigmoid output, trained by Adam.

Objective: mean binary cross-entropy plus ``l2 / 2 * sum ||W||^2`` over the
weight matrices (biases are not penalised).
"""
from __future__ import annotations

import numpy as np

from ..errors import NonFiniteLoss


def init_params(sizes, gen: np.random.Generator) -> list:
    """Glorot-uniform weights, zero biases; returns ``[W0, b0, W1, b1, ...]``."""
    params = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        params.append(gen.uniform(-bound, bound, size=(fan_in, fan_out)))
        params.append(np.zeros(fan_out))
    return params


def logits(params, X: np.ndarray) -> np.ndarray:
    h = X
    n_layers = len(params) // 2
    for i in range(n_layers - 1):
        h = np.maximum(h @ params[2 * i] + params[2 * i + 1], 0.0)
    return (h @ params[-2] + params[-1])[:, 0]


def predict(params, X: np.ndarray) -> np.ndarray:
    z = logits(params, X)
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def loss_and_grad(params, X: np.ndarray, y: np.ndarray, l2: float):
    n_layers = len(params) // 2
    acts = [X]
    h = X
    for i in range(n_layers - 1):
        h = np.maximum(h @ params[2 * i] + params[2 * i + 1], 0.0)
        acts.append(h)
    z = (h @ params[-2] + params[-1])[:, 0]
    n = len(y)
    loss = float(np.mean(np.logaddexp(0.0, z) - y * z))
    loss += 0.5 * l2 * sum(float(np.vdot(params[2 * i], params[2 * i])) for i in range(n_layers))
    p = 0.5 * (1.0 + np.tanh(0.5 * z))
    delta = ((p - y) / n)[:, None]
    grads = [None] * len(params)
    for i in range(n_layers - 1, -1, -1):
        W = params[2 * i]
        grads[2 * i] = acts[i].T @ delta + l2 * W
        grads[2 * i + 1] = delta.sum(axis=0)
        if i:
            delta = (delta @ W.T) * (acts[i] > 0)
    return loss, grads


def train_mlp(X, y, hidden, gen: np.random.Generator, learning_rate=1e-3, l2=1e-4,
              epochs=200, batch_size=128, betas=(0.9, 0.999), eps=1e-8):
    """Minibatch Adam; returns ``(params, per-epoch mean training loss)``."""
    y = np.asarray(y, dtype=np.float64)
    n, d = X.shape
    params = init_params([d, *hidden, 1], gen)
    m = [np.zeros_like(p) for p in params]
    v = [np.zeros_like(p) for p in params]
    b1, b2 = betas
    bs = min(batch_size, n)
    t = 0
    history = []
    for _ in range(epochs):
        order = gen.permutation(n)
        total = 0.0
        for s in range(0, n, bs):
            idx = order[s:s + bs]
            loss, grads = loss_and_grad(params, X[idx], y[idx], l2)
            total += loss * len(idx)
            t += 1
            lr_t = learning_rate * np.sqrt(1 - b2 ** t) / (1 - b1 ** t)
            for p, g, mi, vi in zip(params, grads, m, v):
                mi *= b1
                mi += (1 - b1) * g
                vi *= b2
                vi += (1 - b2) * g * g
                p -= lr_t * mi / (np.sqrt(vi) + eps)
        epoch_loss = total / n
        if not np.isfinite(epoch_loss):
            raise NonFiniteLoss("MLP training loss diverged; lower the learning rate or check inputs")
        history.append(epoch_loss)
    return params, history
