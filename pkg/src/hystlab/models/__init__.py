"""Quantile learners: linear (LQR), boosted trees (QXGB), and recurrent
(QGRU), plus shared training configuration and prediction repair."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..core import QuantileLevels


def empirical_quantile(y: np.ndarray, tau: float) -> float:
    """The pinball-loss-minimizing empirical quantile (lower order statistic).

    For tau*N integral the minimizer is a flat interval; the left endpoint
    is returned so grid-scan oracles agree with it.
    """
    y = np.sort(np.asarray(y, dtype=float))
    n = y.size
    k = max(int(np.ceil(tau * n)), 1) - 1
    return float(y[k])


def pinball_grad(y: np.ndarray, y_hat: np.ndarray, tau: float) -> np.ndarray:
    """Subgradient of pinball loss w.r.t. the prediction; 0 at exact hits."""
    out = np.where(y > y_hat, -tau, 1.0 - tau)
    return np.where(y == y_hat, 0.0, out)


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters for any of the three quantile learners.

    Model-specific fields are ignored by the other learners. Ranges follow
    the random-search menus: LQR l1 in [0, 1]; QXGB lr in [0.005, 0.1],
    depth in [3, 5], subsample in [0.6, 1], lambda in [0.1, 10], alpha in
    [0.1, 3], min child weight in [1, 4], colsample in [0.7, 0.9], rounds
    in [50, 1000]; QGRU lr in [0.02, 0.5] (scaled for momentum SGD), hidden
    in [4, 64], layers in {1, 2}, batch in [8, 32].
    """

    quantiles: QuantileLevels = field(default_factory=QuantileLevels)
    seed: int = 0
    learning_rate: float = 0.01
    batch_size: int = 16
    max_epochs: int = 200
    patience: int = 20
    # LQR
    l1_strength: float = 0.0
    # QXGB
    max_depth: int = 3
    subsample: float = 1.0
    reg_lambda: float = 1.0
    reg_alpha: float = 0.0
    min_child_weight: float = 1.0
    colsample_bytree: float = 1.0
    n_rounds: int = 100
    # QGRU
    hidden_size: int = 16
    n_layers: int = 1
    autoregressive: bool = False

    def replace(self, **kwargs) -> "TrainConfig":
        from dataclasses import replace

        return replace(self, **kwargs)


def repair_quantile_crossing(predictions: np.ndarray, enabled: bool = True) -> np.ndarray:
    """Monotone rearrangement: sort each sample's quantile predictions."""
    predictions = np.asarray(predictions, dtype=float)
    if not enabled:
        return predictions
    return np.sort(predictions, axis=-1)


from .lqr import LqrModel, predict_lqr, train_lqr  # noqa: E402
from .qxgb import QxgbModel, predict_qxgb, train_qxgb  # noqa: E402
from .qgru import (  # noqa: E402
    QgruModel,
    gru_forward,
    predict_qgru,
    predict_qgru_autoregressive,
    train_qgru,
)
from ..serialize import load_model, save_model  # noqa: E402

__all__ = [
    "TrainConfig",
    "empirical_quantile",
    "pinball_grad",
    "repair_quantile_crossing",
    "LqrModel",
    "train_lqr",
    "predict_lqr",
    "QxgbModel",
    "train_qxgb",
    "predict_qxgb",
    "QgruModel",
    "gru_forward",
    "train_qgru",
    "predict_qgru",
    "predict_qgru_autoregressive",
    "save_model",
    "load_model",
]
