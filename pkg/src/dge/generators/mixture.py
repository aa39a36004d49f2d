"""Full-covariance Gaussian mixture fitted by EM."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from ..errors import SingularCovariance

LOG_2PI = np.log(2 * np.pi)


def _cholesky(cov: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as e:
        raise SingularCovariance("covariance is not positive definite after regularisation") from e


def gaussian_logpdf(X: np.ndarray, mean: np.ndarray, cov: np.ndarray) -> np.ndarray:
    L = _cholesky(cov)
    z = np.linalg.solve(L, (X - mean).T)
    logdet = 2.0 * np.log(np.diag(L)).sum()
    return -0.5 * (X.shape[1] * LOG_2PI + logdet + (z * z).sum(axis=0))


@dataclass(frozen=True, eq=False)
class GaussianMixture:
    weights: np.ndarray  # (m,)
    means: np.ndarray  # (m, d)
    covs: np.ndarray  # (m, d, d)

    @property
    def n_components(self) -> int:
        return len(self.weights)

    def component_logpdf(self, X: np.ndarray) -> np.ndarray:
        """``(n, m)`` array of ``log w_j + log N(x | mu_j, Sigma_j)``."""
        return np.column_stack([
            np.log(w) + gaussian_logpdf(X, mu, S)
            for w, mu, S in zip(self.weights, self.means, self.covs)
        ])

    def logpdf(self, X: np.ndarray) -> np.ndarray:
        return logsumexp(self.component_logpdf(np.atleast_2d(X)), axis=1)

    def sample(self, n: int, gen: np.random.Generator) -> np.ndarray:
        comp = gen.choice(self.n_components, size=n, p=self.weights)
        z = gen.standard_normal((n, self.means.shape[1]))
        out = np.empty_like(z)
        for j in range(self.n_components):
            idx = comp == j
            if idx.any():
                L = _cholesky(self.covs[j])
                out[idx] = self.means[j] + z[idx] @ L.T
        return out

    def to_dict(self) -> dict:
        return {"weights": self.weights.tolist(), "means": self.means.tolist(),
                "covs": self.covs.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "GaussianMixture":
        return cls(np.asarray(d["weights"], float), np.asarray(d["means"], float),
                   np.asarray(d["covs"], float))


def covariance_floor(X: np.ndarray) -> float:
    d = X.shape[1]
    cov = np.atleast_2d(np.cov(X, rowvar=False, bias=True))
    return 1e-6 * float(np.trace(cov)) / d


def kmeans_pp(X: np.ndarray, m: int, gen: np.random.Generator) -> np.ndarray:
    """k-means++ seeding: each new centre drawn with probability proportional to D^2."""
    n = X.shape[0]
    centres = [X[gen.integers(n)]]
    d2 = ((X - centres[0]) ** 2).sum(axis=1)
    for _ in range(1, m):
        total = d2.sum()
        if total <= 0:
            idx = gen.integers(n)
        else:
            idx = gen.choice(n, p=d2 / total)
        centres.append(X[idx])
        d2 = np.minimum(d2, ((X - X[idx]) ** 2).sum(axis=1))
    return np.array(centres)


def _floor_penalty(covs: np.ndarray, floor: float) -> np.ndarray:
    # E over isotropic N(0, floor*I) jitter of log N(x | mu, S) is log N(x | mu, S) - floor*tr(S^-1)/2;
    # EM on that objective has M-step S = MLE + floor*I, so the tracked objective is monotone.
    return np.array([0.5 * floor * np.trace(np.linalg.inv(S)) for S in covs])


def _em_once(X, m, gen, floor, tol, max_iter):
    n, d = X.shape
    base_cov = np.atleast_2d(np.cov(X, rowvar=False, bias=True)) + floor * np.eye(d)
    gm = GaussianMixture(np.full(m, 1.0 / m), kmeans_pp(X, m, gen),
                         np.repeat(base_cov[None], m, axis=0))
    trace = []
    converged = False
    for it in range(max_iter + 1):
        comp = gm.component_logpdf(X) - _floor_penalty(gm.covs, floor)
        ll_rows = logsumexp(comp, axis=1)
        ll = float(ll_rows.mean())
        trace.append(ll)
        if len(trace) > 1 and abs(trace[-1] - trace[-2]) <= tol * abs(trace[-2]):
            converged = True
            break
        if it == max_iter:
            break
        resp = np.exp(comp - ll_rows[:, None])
        nk = resp.sum(axis=0) + 10 * np.finfo(float).eps
        means = (resp.T @ X) / nk[:, None]
        covs = np.empty((m, d, d))
        for j in range(m):
            diff = X - means[j]
            covs[j] = (resp[:, j, None] * diff).T @ diff / nk[j]
            covs[j] = 0.5 * (covs[j] + covs[j].T) + floor * np.eye(d)
        gm = GaussianMixture(nk / nk.sum(), means, covs)
    return gm, trace, len(trace) - 1, converged


def fit_mixture(X: np.ndarray, m: int, gen: np.random.Generator, tol: float = 1e-6,
                max_iter: int = 500, n_restarts: int = 3):
    """EM with k-means++ restarts; keeps the restart with the best final likelihood.

    Returns ``(mixture, trace, n_iterations, converged)`` where ``trace`` is
    the mean per-row objective after each M-step (first entry: init).
    The floor ``1e-6 * trace(cov) / d`` is added to every covariance diagonal;
    the objective is the log-likelihood of floor-jittered rows, which differs
    from the plain log-likelihood by ``floor * tr(cov^-1) / 2`` per component.
    """
    floor = covariance_floor(X)
    if floor <= 0:
        raise SingularCovariance("class data has zero variance; cannot fit a Gaussian mixture")
    best = None
    for _ in range(n_restarts):
        res = _em_once(X, m, gen, floor, tol, max_iter)
        if best is None or res[1][-1] > best[1][-1]:
            best = res
    return best
