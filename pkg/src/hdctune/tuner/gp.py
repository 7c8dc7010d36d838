"""Fixed-hyperparameter Gaussian process regression with a Matern-5/2 kernel."""

from __future__ import annotations

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.stats import norm

LENGTH_SCALE = 0.3
NOISE = 1e-4
_SQRT5 = np.sqrt(5.0)


def matern52(A: np.ndarray, B: np.ndarray, length_scale: float = LENGTH_SCALE) -> np.ndarray:
    d = np.sqrt(np.maximum(((A[:, None, :] - B[None, :, :]) ** 2).sum(-1), 0.0)) / length_scale
    return (1.0 + _SQRT5 * d + 5.0 / 3.0 * d**2) * np.exp(-_SQRT5 * d)


class GP:
    """Constant-mean GP on unit-cube inputs with normalized outputs.

    ``prior_mean`` and ``prior_scale`` are used when there are too few
    observations to estimate them (no data, or a single point).
    """

    def __init__(self, X, y, prior_mean: float = 0.0, prior_scale: float = 1.0,
                 length_scale: float = LENGTH_SCALE, noise: float = NOISE):
        self.X = np.asarray(X, dtype=np.float64).reshape(-1, 2) if len(X) else np.empty((0, 2))
        y = np.asarray(y, dtype=np.float64)
        self.length_scale = length_scale
        if len(y) == 0:
            self.mean, self.scale = float(prior_mean), float(prior_scale)
        else:
            self.mean = float(y.mean())
            s = float(y.std()) if len(y) > 1 else 0.0
            self.scale = s if s > 1e-12 else float(prior_scale)
        if len(y):
            K = matern52(self.X, self.X, length_scale) + noise * np.eye(len(y))
            self._chol = cho_factor(K, lower=True)
            self._alpha = cho_solve(self._chol, (y - self.mean) / self.scale)

    def predict(self, Xq) -> tuple[np.ndarray, np.ndarray]:
        """Posterior mean and standard deviation at ``Xq``."""
        Xq = np.asarray(Xq, dtype=np.float64)
        if len(self.X) == 0:
            n = len(Xq)
            return np.full(n, self.mean), np.full(n, self.scale)
        Ks = matern52(Xq, self.X, self.length_scale)
        mu = Ks @ self._alpha
        v = cho_solve(self._chol, Ks.T)
        var = np.maximum(1.0 - np.einsum("ij,ji->i", Ks, v), 1e-12)
        return self.mean + self.scale * mu, self.scale * np.sqrt(var)


def expected_improvement(mu, sd, best: float) -> np.ndarray:
    z = (mu - best) / sd
    return sd * (z * norm.cdf(z) + norm.pdf(z))


def prob_below(mu, sd, bound: float) -> np.ndarray:
    return norm.cdf((bound - mu) / sd)


def prob_above(mu, sd, bound: float) -> np.ndarray:
    return norm.cdf((mu - bound) / sd)
