"""Linear quantile regression trained by subgradient descent."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import QuantileLevels
from . import TrainConfig, empirical_quantile, pinball_grad


@dataclass(frozen=True)
class LqrModel:
    """One (weights, intercept) pair per quantile level, ascending tau."""

    quantiles: QuantileLevels
    weights: np.ndarray  # |Q| x K
    intercepts: np.ndarray  # |Q|
    l1_strength: float = 0.0

    @property
    def n_features(self) -> int:
        return self.weights.shape[1]


def _fit_one_quantile(
    x: np.ndarray, y: np.ndarray, tau: float, config: TrainConfig
) -> tuple[np.ndarray, float]:
    n, k = x.shape
    beta = np.zeros(k)
    b = empirical_quantile(y, tau)
    lr0 = config.learning_rate
    # L1 penalty is averaged over samples like the data term, so the
    # search range [0, 1] stays on the same scale as the pinball loss
    l1 = config.l1_strength / n
    best_loss = np.inf
    stall = 0
    for epoch in range(config.max_epochs):
        lr = lr0 / (1.0 + epoch / 200.0)
        y_hat = x @ beta + b
        g = pinball_grad(y, y_hat, tau)
        grad_beta = x.T @ g / n + l1 * np.sign(beta)
        grad_b = g.mean()
        beta -= lr * grad_beta
        b -= lr * grad_b
        diff = y - y_hat
        loss = float(
            np.mean(np.where(diff >= 0, tau * diff, (tau - 1.0) * diff))
            + l1 * np.sum(np.abs(beta))
        )
        if loss < best_loss - 1e-8:
            best_loss = loss
            stall = 0
        else:
            stall += 1
            if stall >= config.patience:
                break
    return beta, float(b)


def train_lqr(x: np.ndarray, y: np.ndarray, config: TrainConfig) -> LqrModel:
    """Minimize mean pinball loss + l1 * ||beta||_1 per quantile.

    The intercept starts at the empirical quantile of y, so the
    intercept-only model (K = 0) is exact from initialization.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim != 2 or x.shape[0] != y.size:
        raise ValueError("x must be (N, K) matching y")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("non-finite training inputs")
    if y.size < 2:
        raise ValueError("need at least 2 samples")
    weights = np.empty((len(config.quantiles), x.shape[1]))
    intercepts = np.empty(len(config.quantiles))
    for j, tau in enumerate(config.quantiles):
        weights[j], intercepts[j] = _fit_one_quantile(x, y, tau, config)
    return LqrModel(
        quantiles=config.quantiles,
        weights=weights,
        intercepts=intercepts,
        l1_strength=config.l1_strength,
    )


def predict_lqr(model: LqrModel, x: np.ndarray) -> np.ndarray:
    """Affine map per quantile; returns N x |Q|, unclipped."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[1] != model.n_features:
        raise ValueError(
            f"expected {model.n_features} features, got {x.shape[1] if x.ndim == 2 else '?'}"
        )
    return x @ model.weights.T + model.intercepts
