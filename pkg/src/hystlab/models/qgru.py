"""Gated recurrent quantile network with hand-rolled backpropagation
through time.

One shared recurrent trunk (1 or 2 layers) feeds a linear head per target
quantile; all heads are trained jointly on the average pinball loss with
momentum SGD, gradient-norm clipping, and early stopping on validation
loss.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import QuantileLevels
from . import TrainConfig, pinball_grad


def _sigmoid(a):
    out = np.empty_like(a)
    pos = a >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-a[pos]))
    e = np.exp(a[~pos])
    out[~pos] = e / (1.0 + e)
    return out


@dataclass(frozen=True)
class GruLayer:
    """Gate parameters for one recurrent layer."""

    w_z: np.ndarray
    w_r: np.ndarray
    w_h: np.ndarray
    u_z: np.ndarray
    u_r: np.ndarray
    u_h: np.ndarray
    b_z: np.ndarray
    b_r: np.ndarray
    b_h: np.ndarray

    def named_params(self, prefix: str):
        return [
            (f"{prefix}.w_z", self.w_z),
            (f"{prefix}.w_r", self.w_r),
            (f"{prefix}.w_h", self.w_h),
            (f"{prefix}.u_z", self.u_z),
            (f"{prefix}.u_r", self.u_r),
            (f"{prefix}.u_h", self.u_h),
            (f"{prefix}.b_z", self.b_z),
            (f"{prefix}.b_r", self.b_r),
            (f"{prefix}.b_h", self.b_h),
        ]


@dataclass(frozen=True)
class QgruModel:
    """Stacked GRU trunk plus one linear head per quantile (ascending tau)."""

    quantiles: QuantileLevels
    layers: tuple[GruLayer, ...]
    head_w: np.ndarray  # |Q| x H
    head_b: np.ndarray  # |Q|
    input_size: int
    autoregressive: bool = False

    @property
    def hidden_size(self) -> int:
        return self.head_w.shape[1]

    @property
    def n_layers(self) -> int:
        return len(self.layers)

    def named_params(self):
        out = []
        for i, layer in enumerate(self.layers):
            out.extend(layer.named_params(f"layer{i}"))
        out.append(("head_w", self.head_w))
        out.append(("head_b", self.head_b))
        return out


def init_qgru(input_size: int, config: TrainConfig) -> QgruModel:
    """Seeded uniform initialization in [-1/sqrt(H), 1/sqrt(H)]."""
    h = config.hidden_size
    rng = np.random.default_rng(config.seed)
    scale = 1.0 / np.sqrt(h)

    def u(*shape):
        return rng.uniform(-scale, scale, size=shape)

    layers = []
    f_in = input_size
    for _ in range(config.n_layers):
        layers.append(
            GruLayer(
                w_z=u(f_in, h), w_r=u(f_in, h), w_h=u(f_in, h),
                u_z=u(h, h), u_r=u(h, h), u_h=u(h, h),
                b_z=u(h), b_r=u(h), b_h=u(h),
            )
        )
        f_in = h
    return QgruModel(
        quantiles=config.quantiles,
        layers=tuple(layers),
        head_w=u(len(config.quantiles), h),
        head_b=u(len(config.quantiles)),
        input_size=input_size,
        autoregressive=config.autoregressive,
    )


def _layer_forward(layer: GruLayer, x_seq: np.ndarray):
    """Run one layer over (B, T, F_in); returns hidden sequence and caches."""
    b, t_steps, _ = x_seq.shape
    h_dim = layer.b_z.size
    h_seq = np.zeros((b, t_steps + 1, h_dim))
    z_seq = np.empty((b, t_steps, h_dim))
    r_seq = np.empty((b, t_steps, h_dim))
    hh_seq = np.empty((b, t_steps, h_dim))
    h = h_seq[:, 0]
    for t in range(t_steps):
        x = x_seq[:, t]
        z = _sigmoid(x @ layer.w_z + h @ layer.u_z + layer.b_z)
        r = _sigmoid(x @ layer.w_r + h @ layer.u_r + layer.b_r)
        hh = np.tanh(x @ layer.w_h + (r * h) @ layer.u_h + layer.b_h)
        h = (1.0 - z) * h + z * hh
        h_seq[:, t + 1] = h
        z_seq[:, t] = z
        r_seq[:, t] = r
        hh_seq[:, t] = hh
    return h_seq, {"x": x_seq, "h": h_seq, "z": z_seq, "r": r_seq, "hh": hh_seq}


def _layer_backward(layer: GruLayer, cache: dict, d_h_ext: np.ndarray):
    """BPTT through one layer.

    d_h_ext has shape (B, T, H): external gradient arriving at each step's
    hidden state (from the layer above, or the heads at the final step).
    Returns per-parameter grads and the gradient w.r.t. the input sequence.
    """
    x_seq, h_seq = cache["x"], cache["h"]
    z_seq, r_seq, hh_seq = cache["z"], cache["r"], cache["hh"]
    b, t_steps, _ = x_seq.shape
    grads = {
        "w_z": np.zeros_like(layer.w_z),
        "w_r": np.zeros_like(layer.w_r),
        "w_h": np.zeros_like(layer.w_h),
        "u_z": np.zeros_like(layer.u_z),
        "u_r": np.zeros_like(layer.u_r),
        "u_h": np.zeros_like(layer.u_h),
        "b_z": np.zeros_like(layer.b_z),
        "b_r": np.zeros_like(layer.b_r),
        "b_h": np.zeros_like(layer.b_h),
    }
    d_x = np.zeros_like(x_seq)
    d_h = np.zeros((b, layer.b_z.size))
    for t in range(t_steps - 1, -1, -1):
        d_h = d_h + d_h_ext[:, t]
        x = x_seq[:, t]
        h_prev = h_seq[:, t]
        z, r, hh = z_seq[:, t], r_seq[:, t], hh_seq[:, t]
        d_hh = d_h * z
        d_z = d_h * (hh - h_prev)
        d_h_prev = d_h * (1.0 - z)
        d_ah = d_hh * (1.0 - hh * hh)
        grads["w_h"] += x.T @ d_ah
        grads["b_h"] += d_ah.sum(axis=0)
        d_rh = d_ah @ layer.u_h.T
        grads["u_h"] += (r * h_prev).T @ d_ah
        d_r = d_rh * h_prev
        d_h_prev = d_h_prev + d_rh * r
        d_az = d_z * z * (1.0 - z)
        grads["w_z"] += x.T @ d_az
        grads["u_z"] += h_prev.T @ d_az
        grads["b_z"] += d_az.sum(axis=0)
        d_h_prev = d_h_prev + d_az @ layer.u_z.T
        d_ar = d_r * r * (1.0 - r)
        grads["w_r"] += x.T @ d_ar
        grads["u_r"] += h_prev.T @ d_ar
        grads["b_r"] += d_ar.sum(axis=0)
        d_h_prev = d_h_prev + d_ar @ layer.u_r.T
        d_x[:, t] = d_az @ layer.w_z.T + d_ar @ layer.w_r.T + d_ah @ layer.w_h.T
        d_h = d_h_prev
    return grads, d_x


def _forward(model: QgruModel, x: np.ndarray):
    """Full trunk forward over (B, T, F); returns final hidden and caches."""
    caches = []
    seq = x
    for layer in model.layers:
        h_seq, cache = _layer_forward(layer, seq)
        caches.append(cache)
        seq = h_seq[:, 1:]
    return seq[:, -1], caches


def gru_forward(model: QgruModel, sequence: np.ndarray) -> np.ndarray:
    """Final top-layer hidden state h_T for a single (T, F_in) sequence."""
    sequence = np.asarray(sequence, dtype=float)
    if sequence.ndim != 2 or sequence.shape[1] != model.input_size:
        raise ValueError(f"expected (T, {model.input_size}) input")
    h_final, _ = _forward(model, sequence[None])
    return h_final[0]


def predict_qgru(model: QgruModel, x: np.ndarray) -> np.ndarray:
    """Quantile heads applied to the final hidden state; returns N x |Q|."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 3 or x.shape[2] != model.input_size:
        raise ValueError(f"expected (N, T, {model.input_size}) input")
    h_final, _ = _forward(model, x)
    return h_final @ model.head_w.T + model.head_b


def qgru_loss_and_grads(model: QgruModel, x: np.ndarray, y: np.ndarray):
    """Average pinball loss over all quantiles and its analytic gradients."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    b = x.shape[0]
    n_q = len(model.quantiles)
    h_final, caches = _forward(model, x)
    y_hat = h_final @ model.head_w.T + model.head_b
    diff = y[:, None] - y_hat
    taus = np.array(model.quantiles.levels)
    loss = float(
        np.mean(np.where(diff >= 0, taus * diff, (taus - 1.0) * diff))
    )
    d_yhat = np.empty_like(y_hat)
    for j, tau in enumerate(taus):
        d_yhat[:, j] = pinball_grad(y, y_hat[:, j], tau)
    d_yhat /= b * n_q
    grads = {
        "head_w": d_yhat.T @ h_final,
        "head_b": d_yhat.sum(axis=0),
    }
    d_h_top = d_yhat @ model.head_w
    t_steps = x.shape[1]
    d_ext = np.zeros((b, t_steps, model.hidden_size))
    d_ext[:, -1] = d_h_top
    for i in range(model.n_layers - 1, -1, -1):
        layer_grads, d_x = _layer_backward(model.layers[i], caches[i], d_ext)
        for name, grad in layer_grads.items():
            grads[f"layer{i}.{name}"] = grad
        d_ext = d_x
    return loss, grads


def _clip_global_norm(grads: dict, max_norm: float) -> dict:
    total = np.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
    if total > max_norm:
        scale = max_norm / total
        return {k: g * scale for k, g in grads.items()}
    return grads


def _eval_aql(model: QgruModel, x: np.ndarray, y: np.ndarray) -> float:
    y_hat = predict_qgru(model, x)
    diff = y[:, None] - y_hat
    taus = np.array(model.quantiles.levels)
    return float(np.mean(np.where(diff >= 0, taus * diff, (taus - 1.0) * diff)))


def train_qgru(
    x: np.ndarray,
    y: np.ndarray,
    config: TrainConfig,
    x_val: np.ndarray | None = None,
    y_val: np.ndarray | None = None,
    initial: QgruModel | None = None,
) -> QgruModel:
    """Mini-batch momentum SGD on the joint quantile loss.

    Early stopping monitors validation loss when a validation set is given,
    otherwise the training loss; the best parameters seen are restored.
    Passing `initial` continues training from an existing model
    (fine-tuning); otherwise parameters are freshly initialized from the
    config seed.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = x.shape[0]
    if config.batch_size > n:
        raise ValueError(f"batch size {config.batch_size} exceeds {n} samples")
    model = initial if initial is not None else init_qgru(x.shape[2], config)
    params = dict(model.named_params())
    if initial is not None:
        params = {k: v.copy() for k, v in params.items()}
        model = _rebuild(model, params)
    velocity = {k: np.zeros_like(v) for k, v in params.items()}
    rng = np.random.default_rng(config.seed + 1)
    best_loss = np.inf
    best_params = {k: v.copy() for k, v in params.items()}
    stall = 0
    momentum = 0.9
    for _ in range(config.max_epochs):
        order = rng.permutation(n)
        for start in range(0, n - config.batch_size + 1, config.batch_size):
            idx = order[start : start + config.batch_size]
            _, grads = qgru_loss_and_grads(model, x[idx], y[idx])
            grads = _clip_global_norm(grads, 1.0)
            for k in params:
                velocity[k] = momentum * velocity[k] - config.learning_rate * grads[k]
                params[k] += velocity[k]
        if x_val is not None and y_val is not None:
            monitor = _eval_aql(model, x_val, y_val)
        else:
            monitor = _eval_aql(model, x, y)
        if monitor < best_loss - 1e-10:
            best_loss = monitor
            best_params = {k: v.copy() for k, v in params.items()}
            stall = 0
        else:
            stall += 1
            if stall >= config.patience:
                break
    for k, v in params.items():
        v[...] = best_params[k]
    return model


def _rebuild(model: QgruModel, params: dict) -> QgruModel:
    layers = []
    for i in range(model.n_layers):
        layers.append(
            GruLayer(**{name: params[f"layer{i}.{name}"] for name in
                        ("w_z", "w_r", "w_h", "u_z", "u_r", "u_h", "b_z", "b_r", "b_h")})
        )
    return QgruModel(
        quantiles=model.quantiles,
        layers=tuple(layers),
        head_w=params["head_w"],
        head_b=params["head_b"],
        input_size=model.input_size,
        autoregressive=model.autoregressive,
    )


def augment_autoregressive(x: np.ndarray, prev: np.ndarray) -> np.ndarray:
    """Append a constant extra channel carrying the previous subsequence's
    label or prediction (0.0 for the first subsequence of a parent)."""
    x = np.asarray(x, dtype=float)
    prev = np.asarray(prev, dtype=float)
    extra = np.broadcast_to(prev[:, None, None], (x.shape[0], x.shape[1], 1))
    return np.concatenate([x, extra], axis=2)


def predict_qgru_autoregressive(model: QgruModel, subsequences: np.ndarray) -> np.ndarray:
    """Sequential prediction over the time-ordered subsequences of one parent.

    Subsequence k receives the median (tau = 0.5) prediction of subsequence
    k-1 as a constant extra channel; the first receives 0.0.
    """
    if not model.autoregressive:
        raise ValueError("model was not trained with the autoregressive flag")
    subsequences = np.asarray(subsequences, dtype=float)
    if subsequences.ndim != 3 or subsequences.shape[2] != model.input_size - 1:
        raise ValueError(f"expected (K, T, {model.input_size - 1}) input")
    taus = list(model.quantiles.levels)
    try:
        median_idx = taus.index(0.5)
    except ValueError:
        median_idx = len(taus) // 2
    out = np.empty((subsequences.shape[0], len(taus)))
    prev = 0.0
    for k in range(subsequences.shape[0]):
        xk = augment_autoregressive(subsequences[k : k + 1], np.array([prev]))
        out[k] = predict_qgru(model, xk)[0]
        prev = float(out[k, median_idx])
    return out
