"""Gradient-boosted regression trees for quantile targets.

Boosting on the pinball loss with unit hessians: gradients take values in
{-tau, 1-tau}, split gains use the usual second-order surrogate with L1/L2
regularization, and leaf values are refined by a one-dimensional line
search over residual-quantile candidates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import QuantileLevels
from . import TrainConfig, empirical_quantile, pinball_grad


@dataclass(frozen=True)
class TreeNode:
    """Internal node (feature, threshold, children) or leaf (value)."""

    feature: int = -1
    threshold: float = 0.0
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None
    value: float = 0.0

    @property
    def is_leaf(self) -> bool:
        return self.feature < 0


@dataclass(frozen=True)
class QxgbModel:
    """Per quantile: a base score plus an ordered list of regression trees."""

    quantiles: QuantileLevels
    base_scores: np.ndarray  # |Q|
    trees: tuple[tuple[TreeNode, ...], ...]  # per quantile
    n_features: int
    max_depth: int


def _soft_threshold(g: float, alpha: float) -> float:
    if g > alpha:
        return g - alpha
    if g < -alpha:
        return g + alpha
    return 0.0


def _leaf_objective(r: np.ndarray, w: float, tau: float, lam: float, alpha: float) -> float:
    diff = r - w
    loss = np.where(diff >= 0, tau * diff, (tau - 1.0) * diff).sum()
    return float(loss + 0.5 * lam * w * w + alpha * abs(w))


def _leaf_value(
    r: np.ndarray, g: np.ndarray, tau: float, eta: float, lam: float, alpha: float
) -> float:
    """Shrunken Newton-style value refined by a pinball line search.

    Candidates are the regularized mean-gradient step and eta-scaled
    empirical quantiles of the leaf residuals.
    """
    base = -_soft_threshold(g.sum(), alpha) / (g.size + lam)
    candidates = {base}
    for q in (0.25, 0.5, 0.75, tau):
        candidates.add(empirical_quantile(r, q))
    best = min(candidates, key=lambda w: _leaf_objective(r, w, tau, lam, alpha))
    return eta * best


def _split_score(g_sum: float, h_sum: float, lam: float, alpha: float) -> float:
    t = _soft_threshold(g_sum, alpha)
    return t * t / (h_sum + lam)


def _build_tree(
    x: np.ndarray,
    r: np.ndarray,
    g: np.ndarray,
    cols: np.ndarray,
    depth: int,
    config: TrainConfig,
    tau: float,
) -> TreeNode:
    n = g.size
    lam, alpha = config.reg_lambda, config.reg_alpha
    if depth >= config.max_depth or n < 2 * config.min_child_weight:
        return TreeNode(value=_leaf_value(r, g, tau, config.learning_rate, lam, alpha))
    parent_score = _split_score(g.sum(), float(n), lam, alpha)
    best_gain = 0.0
    best = None
    n_left = np.arange(1, n, dtype=float)
    n_right = n - n_left
    for j in cols:
        order = np.argsort(x[:, j], kind="stable")
        xs = x[order, j]
        g_cum = np.cumsum(g[order])
        g_total = g_cum[-1]
        # candidate split after position i (left = first i+1 rows)
        gl = g_cum[:-1]
        gr = g_total - gl
        soft_l = np.sign(gl) * np.maximum(np.abs(gl) - alpha, 0.0)
        soft_r = np.sign(gr) * np.maximum(np.abs(gr) - alpha, 0.0)
        gains = (
            soft_l * soft_l / (n_left + lam)
            + soft_r * soft_r / (n_right + lam)
            - parent_score
        )
        valid = (
            (xs[1:] > xs[:-1])
            & (n_left >= config.min_child_weight)
            & (n_right >= config.min_child_weight)
        )
        gains = np.where(valid, gains, -np.inf)
        i = int(np.argmax(gains))
        if gains[i] > best_gain + 1e-12:
            best_gain = float(gains[i])
            best = (int(j), 0.5 * (xs[i] + xs[i + 1]))
    if best is None:
        return TreeNode(value=_leaf_value(r, g, tau, config.learning_rate, lam, alpha))
    feature, threshold = best
    mask = x[:, feature] < threshold
    return TreeNode(
        feature=feature,
        threshold=threshold,
        left=_build_tree(x[mask], r[mask], g[mask], cols, depth + 1, config, tau),
        right=_build_tree(x[~mask], r[~mask], g[~mask], cols, depth + 1, config, tau),
    )


def _tree_predict(node: TreeNode, x: np.ndarray) -> np.ndarray:
    out = np.empty(x.shape[0])
    stack = [(node, np.arange(x.shape[0]))]
    while stack:
        nd, idx = stack.pop()
        if nd.is_leaf:
            out[idx] = nd.value
            continue
        mask = x[idx, nd.feature] < nd.threshold
        stack.append((nd.left, idx[mask]))
        stack.append((nd.right, idx[~mask]))
    return out


def train_qxgb(x: np.ndarray, y: np.ndarray, config: TrainConfig) -> QxgbModel:
    """Boost config.n_rounds trees per quantile on the pinball loss."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim != 2 or x.shape[0] != y.size:
        raise ValueError("x must be (N, K) matching y")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("non-finite training inputs")
    if y.size < 2:
        raise ValueError("need at least 2 samples")
    n, f = x.shape
    rng = np.random.default_rng(config.seed)
    base_scores = np.array([empirical_quantile(y, tau) for tau in config.quantiles])
    all_trees = []
    for j, tau in enumerate(config.quantiles):
        pred = np.full(n, base_scores[j])
        trees: list[TreeNode] = []
        for _ in range(config.n_rounds):
            rows = np.arange(n)
            if config.subsample < 1.0:
                m = max(int(round(config.subsample * n)), 1)
                rows = np.sort(rng.choice(n, size=m, replace=False))
            cols = np.arange(f)
            if config.colsample_bytree < 1.0 and f > 1:
                c = max(int(round(config.colsample_bytree * f)), 1)
                cols = np.sort(rng.choice(f, size=c, replace=False))
            g = pinball_grad(y[rows], pred[rows], tau)
            r = y[rows] - pred[rows]
            tree = _build_tree(x[rows], r, g, cols, 0, config, tau)
            pred += _tree_predict(tree, x)
            trees.append(tree)
        all_trees.append(tuple(trees))
    return QxgbModel(
        quantiles=config.quantiles,
        base_scores=base_scores,
        trees=tuple(all_trees),
        n_features=f,
        max_depth=config.max_depth,
    )


def predict_qxgb(model: QxgbModel, x: np.ndarray) -> np.ndarray:
    """base_score + sum of tree outputs, per quantile; returns N x |Q|."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[1] != model.n_features:
        raise ValueError(f"expected {model.n_features} features")
    out = np.tile(model.base_scores, (x.shape[0], 1))
    for j, trees in enumerate(model.trees):
        for tree in trees:
            out[:, j] += _tree_predict(tree, x)
    return out
