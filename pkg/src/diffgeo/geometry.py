"""Per-point coordinate metric, singularity scores and tangent directions."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .algebra import SpectralAlgebra, evaluate, expand
from .synth import PointCloud

__all__ = ["PointMetricField", "coordinate_metric", "singularity_score", "tangent_field"]


@dataclass(frozen=True, eq=False)
class PointMetricField:
    """``M[s] = Gamma(x_a, x_b)(s)`` for centred ambient coordinates.

    ``eigenvalues`` are descending per point and clipped at zero;
    ``clipped`` records the magnitude removed by the clip relative to the
    largest eigenvalue at that point.
    """

    matrices: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    clipped: np.ndarray


def coordinate_metric(pc: PointCloud, algebra: SpectralAlgebra) -> PointMetricField:
    basis = algebra.basis
    X = pc.points - pc.points.mean(axis=0)
    coef = expand(X, basis, algebra.n0)
    gam = np.einsum("ia,jb,ijs->abs", coef, coef, algebra.gamma.values)
    d = X.shape[1]
    M = evaluate(gam.reshape(d * d, -1).T, basis).reshape(-1, d, d)
    M = 0.5 * (M + M.transpose(0, 2, 1))
    w, V = np.linalg.eigh(M)
    w, V = w[:, ::-1], V[:, :, ::-1]
    top = np.maximum(np.abs(w[:, 0]), np.finfo(float).tiny)
    clipped = np.maximum(-w.min(axis=1), 0.0) / top
    return PointMetricField(M, np.maximum(w, 0.0), V, clipped)


def singularity_score(field: PointMetricField) -> np.ndarray:
    """Largest metric eigenvalue at each point divided by its median over the cloud."""
    top = field.eigenvalues[:, 0]
    med = np.median(top)
    return top / med if med > 0 else np.zeros_like(top)


def tangent_field(field: PointMetricField, degenerate_ratio: float = 0.1):
    """Top eigenvector per point and a flag where the top two eigenvalues are within 10%.

    The sign is fixed so that the first nonzero component is positive.
    """
    T = field.eigenvectors[:, :, 0].copy()
    first = np.argmax(np.abs(T) > 1e-12, axis=1)
    signs = np.sign(T[np.arange(len(T)), first])
    signs[signs == 0] = 1.0
    T *= signs[:, None]
    w = field.eigenvalues
    if w.shape[1] > 1:
        degenerate = (w[:, 0] - w[:, 1]) <= degenerate_ratio * w[:, 0]
    else:
        degenerate = np.zeros(len(w), dtype=bool)
    return T, degenerate
