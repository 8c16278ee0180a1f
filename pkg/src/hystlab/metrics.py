"""Evaluation metrics: pinball loss, average quantile loss, interval
coverage, and analytic ROM/RAM accounting."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import QuantileLevels

_MB = float(2**20)
_BYTES_PER_VALUE = 4  # deployment-grade 32-bit storage


def pinball(y, y_hat, tau: float):
    """Quantile (pinball) loss: tau*(y - y_hat) if y >= y_hat else (1-tau)*(y_hat - y)."""
    if not 0.0 < tau < 1.0:
        raise ValueError("tau must lie in (0, 1)")
    y = np.asarray(y, dtype=float)
    y_hat = np.asarray(y_hat, dtype=float)
    diff = y - y_hat
    return np.where(diff >= 0, tau * diff, (tau - 1.0) * diff)


def aql(y, y_hat_q, quantiles: QuantileLevels) -> float:
    """Mean pinball loss over all samples and all quantile levels."""
    y = np.asarray(y, dtype=float)
    y_hat_q = np.asarray(y_hat_q, dtype=float)
    if y_hat_q.shape != (y.size, len(quantiles)):
        raise ValueError(
            f"prediction shape {y_hat_q.shape} does not match "
            f"({y.size}, {len(quantiles)})"
        )
    total = 0.0
    for j, tau in enumerate(quantiles):
        total += pinball(y, y_hat_q[:, j], tau).sum()
    return total / (y.size * len(quantiles))


def coverage(y, y_low, y_high) -> float:
    """Fraction of samples with y_low <= y <= y_high."""
    y = np.asarray(y, dtype=float)
    y_low = np.asarray(y_low, dtype=float)
    y_high = np.asarray(y_high, dtype=float)
    if y_low.shape != y.shape or y_high.shape != y.shape:
        raise ValueError("interval bounds must match target shape")
    return float(np.mean((y_low <= y) & (y <= y_high)))


def rom_mb(model) -> float:
    """Serialized model size in MB: 32-bit parameters plus the header."""
    from .serialize import serialize_model

    return len(serialize_model(model)) / _MB


def ram_mb(model, input_shape: tuple | None = None) -> float:
    """Analytic peak working set for one inference, in MB at 4 bytes/value.

    LQR: one reduced feature row. QXGB: one feature row plus a traversal
    stack of max-depth node indices. QGRU: the input window (T*F) plus the
    per-layer h, z, r, h-tilde buffers and the quantile head outputs.
    """
    from .models.lqr import LqrModel
    from .models.qgru import QgruModel
    from .models.qxgb import QxgbModel

    if isinstance(model, LqrModel):
        values = model.n_features
    elif isinstance(model, QxgbModel):
        values = model.n_features + model.max_depth
    elif isinstance(model, QgruModel):
        if input_shape is None:
            raise ValueError("QGRU RAM accounting needs the (T, F) input shape")
        t, f = input_shape
        values = t * f + 4 * model.hidden_size * model.n_layers + len(model.quantiles)
    else:
        raise TypeError(f"unknown model kind: {type(model).__name__}")
    return values * _BYTES_PER_VALUE / _MB


@dataclass(frozen=True)
class EvalReport:
    """Per-configuration evaluation summary."""

    aql: float
    per_quantile_loss: dict[float, float]
    coverage_90: float
    rom_mb: float
    ram_mb: float
    n_samples: int

    def to_json(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(
                {
                    "aql": self.aql,
                    "per_quantile_loss": {
                        repr(t): v for t, v in self.per_quantile_loss.items()
                    },
                    "coverage_90": self.coverage_90,
                    "rom_mb": self.rom_mb,
                    "ram_mb": self.ram_mb,
                    "n_samples": self.n_samples,
                },
                indent=2,
            )
        )


def evaluate_predictions(
    y, y_hat_q, quantiles: QuantileLevels, model=None, input_shape=None
) -> EvalReport:
    """Build an EvalReport from targets and N x |Q| predictions."""
    y = np.asarray(y, dtype=float)
    y_hat_q = np.asarray(y_hat_q, dtype=float)
    per_q = {
        tau: float(pinball(y, y_hat_q[:, j], tau).mean())
        for j, tau in enumerate(quantiles)
    }
    cov = coverage(y, y_hat_q[:, 0], y_hat_q[:, -1]) if len(quantiles) >= 2 else 1.0
    return EvalReport(
        aql=float(np.mean(list(per_q.values()))),
        per_quantile_loss=per_q,
        coverage_90=cov,
        rom_mb=rom_mb(model) if model is not None else 0.0,
        ram_mb=ram_mb(model, input_shape) if model is not None else 0.0,
        n_samples=int(y.size),
    )
