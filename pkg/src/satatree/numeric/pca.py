from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from satatree.errors import DimensionError
from satatree.numeric.tensor import Tensor


@dataclass(frozen=True)
class PrincipalAxes:
    mean: np.ndarray
    eigenvalues: np.ndarray
    """Covariance eigenvalues, largest first (covariance normalised by n)."""
    components: np.ndarray
    """One unit direction per row, in the same order as ``eigenvalues``."""


def pca_decompose(points: np.ndarray | Tensor) -> PrincipalAxes:
    data = np.asarray(points.data if isinstance(points, Tensor) else points, dtype=np.float64)
    if data.ndim != 2 or data.shape[0] < 2:
        raise DimensionError(f"PCA needs at least two points in a matrix, got shape {data.shape}")

    mean = data.mean(axis=0)
    centred = data - mean
    cov = centred.T @ centred / data.shape[0]
    values, vectors = np.linalg.eigh(cov)

    order = np.argsort(-values, kind="stable")
    values = np.clip(values[order], 0.0, None)
    components = vectors[:, order].T

    # Sign convention: the largest-magnitude entry of each direction is positive.
    pivots = np.argmax(np.abs(components), axis=1)
    signs = np.sign(components[np.arange(len(components)), pivots])
    signs[signs == 0] = 1.0
    return PrincipalAxes(mean, values, components * signs[:, None])


def pca_project(points: np.ndarray | Tensor, k: int = 2) -> np.ndarray:
    """Mean-centred projection onto the top-``k`` principal directions."""

    axes = pca_decompose(points)
    if not 0 < k <= axes.components.shape[0]:
        raise DimensionError(f"cannot project {axes.components.shape[0]}-d points onto {k} axes")
    data = np.asarray(points.data if isinstance(points, Tensor) else points, dtype=np.float64)
    return (data - axes.mean) @ axes.components[:k].T


__all__ = ["PrincipalAxes", "pca_decompose", "pca_project"]
