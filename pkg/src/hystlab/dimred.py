"""Dimensionality reduction for statistical-model inputs: PCA via a cyclic
Jacobi eigensolver, and univariate F-test feature selection."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import betainc

_F_CAP = 1e15


def jacobi_eigh(a: np.ndarray, tol: float = 1e-10, max_sweeps: int = 100):
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Returns (eigenvalues, eigenvectors) sorted by descending eigenvalue.
    Convergence: off-diagonal Frobenius norm below tol.
    """
    a = np.array(a, dtype=float)
    n = a.shape[0]
    if a.shape != (n, n) or not np.allclose(a, a.T, atol=1e-12):
        raise ValueError("jacobi_eigh needs a symmetric square matrix")
    v = np.eye(n)
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(np.square(a - np.diag(np.diag(a)))))
        if off < tol:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) < tol / (n * n + 1):
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                if theta == 0.0:
                    t = 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                rot_p = c * a[:, p] - s * a[:, q]
                rot_q = s * a[:, p] + c * a[:, q]
                a[:, p], a[:, q] = rot_p, rot_q
                rot_p = c * a[p, :] - s * a[q, :]
                rot_q = s * a[p, :] + c * a[q, :]
                a[p, :], a[q, :] = rot_p, rot_q
                rot_p = c * v[:, p] - s * v[:, q]
                rot_q = s * v[:, p] + c * v[:, q]
                v[:, p], v[:, q] = rot_p, rot_q
    eigvals = np.diag(a).copy()
    order = np.argsort(-eigvals)
    return eigvals[order], v[:, order]


@dataclass(frozen=True)
class PcaProjector:
    """Centered PCA projection onto the top-K covariance eigenvectors."""

    mean: np.ndarray
    components: np.ndarray  # F_s x K, orthonormal columns
    explained_variance_ratio: np.ndarray

    @property
    def k(self) -> int:
        return self.components.shape[1]

    def to_json(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(
                {
                    "mean": self.mean.tolist(),
                    "components": self.components.tolist(),
                    "explained_variance_ratio": self.explained_variance_ratio.tolist(),
                }
            )
        )

    @classmethod
    def from_json(cls, path: str | Path) -> "PcaProjector":
        doc = json.loads(Path(path).read_text())
        return cls(
            mean=np.array(doc["mean"], dtype=float),
            components=np.array(doc["components"], dtype=float),
            explained_variance_ratio=np.array(
                doc["explained_variance_ratio"], dtype=float
            ),
        )


@dataclass(frozen=True)
class FRegSelector:
    """Top-K feature selection by univariate F-statistic p-values."""

    f_stats: np.ndarray
    p_values: np.ndarray
    selected_indices: tuple[int, ...]
    feature_names: tuple[str, ...] = ()

    def to_json(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(
                {
                    "f_stats": self.f_stats.tolist(),
                    "p_values": self.p_values.tolist(),
                    "selected_indices": list(self.selected_indices),
                    "feature_names": list(self.feature_names),
                }
            )
        )

    @classmethod
    def from_json(cls, path: str | Path) -> "FRegSelector":
        doc = json.loads(Path(path).read_text())
        return cls(
            f_stats=np.array(doc["f_stats"], dtype=float),
            p_values=np.array(doc["p_values"], dtype=float),
            selected_indices=tuple(doc["selected_indices"]),
            feature_names=tuple(doc.get("feature_names", ())),
        )


def fit_pca(
    x: np.ndarray, k: int | None = None, variance_target: float | None = None
) -> PcaProjector:
    """Fit centered PCA on the rows of x.

    Either k or a variance_target in (0, 1] must be given; with a target,
    K is the smallest prefix whose cumulative explained ratio reaches it.
    Eigenvector signs are normalized so the largest-magnitude entry of each
    component is positive.
    """
    x = np.asarray(x, dtype=float)
    n, f = x.shape
    if n < 2:
        raise ValueError("PCA needs at least 2 rows")
    mean = x.mean(axis=0)
    xc = x - mean
    cov = xc.T @ xc / (n - 1)
    eigvals, eigvecs = jacobi_eigh(cov)
    eigvals = np.maximum(eigvals, 0.0)
    total = eigvals.sum()
    ratios = eigvals / total if total > 0 else np.zeros_like(eigvals)
    if k is None:
        if variance_target is None or not 0.0 < variance_target <= 1.0:
            raise ValueError("need k or a variance_target in (0, 1]")
        k = int(np.searchsorted(np.cumsum(ratios), variance_target) + 1)
        k = min(k, f)
    if not 1 <= k <= f:
        raise ValueError(f"k must lie in [1, {f}]")
    comps = eigvecs[:, :k].copy()
    for j in range(k):
        pivot = np.argmax(np.abs(comps[:, j]))
        if comps[pivot, j] < 0:
            comps[:, j] = -comps[:, j]
    return PcaProjector(
        mean=mean, components=comps, explained_variance_ratio=ratios[:k]
    )


def apply_pca(x: np.ndarray, projector: PcaProjector) -> np.ndarray:
    """Project centered rows onto the fitted components: (x - mean) W."""
    x = np.asarray(x, dtype=float)
    if x.shape[1] != projector.mean.size:
        raise ValueError("feature dimension does not match projector")
    return (x - projector.mean) @ projector.components


def inverse_pca(z: np.ndarray, projector: PcaProjector) -> np.ndarray:
    """Map scores back to the original feature space."""
    return z @ projector.components.T + projector.mean


def fit_freg(x: np.ndarray, y: np.ndarray, k: int) -> FRegSelector:
    """Univariate F-test feature ranking with top-K selection.

    Per feature: F = r^2 / (1 - r^2) * (N - 2); p = upper tail of F(1, N-2)
    via the regularized incomplete beta function. Zero-variance features get
    F = 0, p = 1; ties in p break toward the lower feature index.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n, f = x.shape
    if n < 3:
        raise ValueError("F-regression needs N >= 3")
    if np.std(y) == 0:
        raise ValueError("target has zero variance")
    if not 1 <= k <= f:
        raise ValueError(f"k must lie in [1, {f}]")
    yc = y - y.mean()
    xc = x - x.mean(axis=0)
    x_norm = np.sqrt(np.sum(xc * xc, axis=0))
    y_norm = np.sqrt(np.sum(yc * yc))
    with np.errstate(invalid="ignore", divide="ignore"):
        r = (xc.T @ yc) / (x_norm * y_norm)
    r = np.where(x_norm > 0, r, 0.0)
    r2 = np.clip(r * r, 0.0, 1.0)
    dof = n - 2
    f_stats = np.where(r2 < 1.0, r2 / np.maximum(1.0 - r2, 1e-300) * dof, _F_CAP)
    f_stats = np.minimum(f_stats, _F_CAP)
    # P(F(1, dof) > F) = I_{dof/(dof + F)}(dof/2, 1/2)
    p = betainc(dof / 2.0, 0.5, dof / (dof + f_stats))
    p = np.where(r2 >= 1.0, 0.0, p)
    p = np.where(x_norm > 0, p, 1.0)
    order = np.lexsort((np.arange(f), p))
    return FRegSelector(
        f_stats=f_stats, p_values=p, selected_indices=tuple(int(i) for i in order[:k])
    )


def apply_freg(x: np.ndarray, selector: FRegSelector) -> np.ndarray:
    """Column subset in selected order."""
    x = np.asarray(x, dtype=float)
    if x.shape[1] != selector.p_values.size:
        raise ValueError("feature dimension does not match selector")
    return x[:, list(selector.selected_indices)]
