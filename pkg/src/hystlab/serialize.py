"""Binary model files: magic bytes, JSON header, little-endian float32 blob.

Blob layout. LQR: per quantile, weights then intercept. QGRU: per layer
w_z, w_r, w_h, u_z, u_r, u_h, b_z, b_r, b_h, then head weights and biases.
QXGB: per quantile, base score then preorder node records of 4 floats
(is_leaf, feature, threshold, value).
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .core import QuantileLevels

MAGIC = b"HYST1"
FORMAT_VERSION = 1


class ModelFormatError(ValueError):
    """Corrupt file, wrong magic, or unsupported format version."""


def _tree_to_records(node) -> list[tuple[float, float, float, float]]:
    if node.is_leaf:
        return [(1.0, 0.0, 0.0, float(node.value))]
    recs = [(0.0, float(node.feature), float(node.threshold), 0.0)]
    recs.extend(_tree_to_records(node.left))
    recs.extend(_tree_to_records(node.right))
    return recs


def _tree_from_records(records: np.ndarray, pos: int):
    from .models.qxgb import TreeNode

    is_leaf, feature, threshold, value = records[pos]
    if is_leaf >= 0.5:
        return TreeNode(value=float(value)), pos + 1
    left, nxt = _tree_from_records(records, pos + 1)
    right, nxt = _tree_from_records(records, nxt)
    return TreeNode(
        feature=int(feature), threshold=float(threshold), left=left, right=right
    ), nxt


def serialize_model(model) -> bytes:
    from .models.lqr import LqrModel
    from .models.qgru import QgruModel
    from .models.qxgb import QxgbModel

    if not isinstance(model, (LqrModel, QgruModel, QxgbModel)):
        raise TypeError(f"cannot serialize {type(model).__name__}")
    header: dict = {
        "version": FORMAT_VERSION,
        "quantiles": list(model.quantiles.levels),
    }
    parts: list[np.ndarray] = []
    if isinstance(model, LqrModel):
        header.update(kind="lqr", n_features=model.n_features,
                      l1_strength=model.l1_strength)
        for j in range(len(model.quantiles)):
            parts.append(model.weights[j])
            parts.append(np.array([model.intercepts[j]]))
    elif isinstance(model, QgruModel):
        header.update(
            kind="qgru",
            input_size=model.input_size,
            hidden_size=model.hidden_size,
            n_layers=model.n_layers,
            autoregressive=model.autoregressive,
        )
        for layer in model.layers:
            for _, arr in layer.named_params(""):
                parts.append(arr.ravel())
        parts.append(model.head_w.ravel())
        parts.append(model.head_b)
    elif isinstance(model, QxgbModel):
        tree_nodes = []
        for trees in model.trees:
            tree_nodes.append([len(_tree_to_records(t)) for t in trees])
        header.update(
            kind="qxgb",
            n_features=model.n_features,
            max_depth=model.max_depth,
            tree_nodes=tree_nodes,
        )
        for j, trees in enumerate(model.trees):
            parts.append(np.array([model.base_scores[j]]))
            for tree in trees:
                parts.append(np.array(_tree_to_records(tree)).ravel())
    else:
        raise TypeError(f"cannot serialize {type(model).__name__}")
    header_bytes = json.dumps(header, sort_keys=True).encode()
    blob = np.concatenate(parts).astype("<f4").tobytes() if parts else b""
    return MAGIC + struct.pack("<I", len(header_bytes)) + header_bytes + blob


def save_model(model, path: str | Path) -> None:
    Path(path).write_bytes(serialize_model(model))


def load_model(path: str | Path):
    from .models.lqr import LqrModel
    from .models.qgru import GruLayer, QgruModel
    from .models.qxgb import QxgbModel

    raw = Path(path).read_bytes()
    if len(raw) < len(MAGIC) + 4 or raw[: len(MAGIC)] != MAGIC:
        raise ModelFormatError(f"{path}: not a model file (bad magic)")
    off = len(MAGIC)
    (hlen,) = struct.unpack_from("<I", raw, off)
    off += 4
    try:
        header = json.loads(raw[off : off + hlen].decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ModelFormatError(f"{path}: corrupt header: {exc}") from exc
    off += hlen
    if header.get("version") != FORMAT_VERSION:
        raise ModelFormatError(
            f"{path}: unsupported format version {header.get('version')}"
        )
    blob = np.frombuffer(raw[off:], dtype="<f4").astype(float)
    quantiles = QuantileLevels(tuple(header["quantiles"]))
    n_q = len(quantiles)
    kind = header["kind"]
    pos = 0

    def take(n: int) -> np.ndarray:
        nonlocal pos
        out = blob[pos : pos + n]
        if out.size != n:
            raise ModelFormatError(f"{path}: truncated parameter blob")
        pos += n
        return out

    if kind == "lqr":
        k = header["n_features"]
        weights = np.empty((n_q, k))
        intercepts = np.empty(n_q)
        for j in range(n_q):
            weights[j] = take(k)
            intercepts[j] = take(1)[0]
        return LqrModel(
            quantiles=quantiles,
            weights=weights,
            intercepts=intercepts,
            l1_strength=header["l1_strength"],
        )
    if kind == "qgru":
        f_in = header["input_size"]
        h = header["hidden_size"]
        layers = []
        dim = f_in
        for _ in range(header["n_layers"]):
            layers.append(
                GruLayer(
                    w_z=take(dim * h).reshape(dim, h),
                    w_r=take(dim * h).reshape(dim, h),
                    w_h=take(dim * h).reshape(dim, h),
                    u_z=take(h * h).reshape(h, h),
                    u_r=take(h * h).reshape(h, h),
                    u_h=take(h * h).reshape(h, h),
                    b_z=take(h),
                    b_r=take(h),
                    b_h=take(h),
                )
            )
            dim = h
        head_w = take(n_q * h).reshape(n_q, h)
        head_b = take(n_q)
        return QgruModel(
            quantiles=quantiles,
            layers=tuple(layers),
            head_w=head_w,
            head_b=head_b,
            input_size=f_in,
            autoregressive=header["autoregressive"],
        )
    if kind == "qxgb":
        base_scores = np.empty(n_q)
        all_trees = []
        for j, node_counts in enumerate(header["tree_nodes"]):
            base_scores[j] = take(1)[0]
            trees = []
            for count in node_counts:
                records = take(4 * count).reshape(count, 4)
                tree, _ = _tree_from_records(records, 0)
                trees.append(tree)
            all_trees.append(tuple(trees))
        return QxgbModel(
            quantiles=quantiles,
            base_scores=base_scores,
            trees=tuple(all_trees),
            n_features=header["n_features"],
            max_depth=header["max_depth"],
        )
    raise ModelFormatError(f"{path}: unknown model kind {kind!r}")
