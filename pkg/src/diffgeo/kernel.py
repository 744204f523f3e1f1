"""Diffusion-maps estimate of the generator and its truncated eigenbasis."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.spatial import cKDTree
from scipy.spatial.distance import cdist

from .errors import InvalidArgument, NumericError
from .synth import PointCloud

__all__ = [
    "KernelConfig",
    "MarkovOperator",
    "SpectralBasis",
    "select_bandwidth",
    "build_markov",
    "spectral_basis",
    "estimate_basis",
    "save_basis",
    "load_basis",
]


@dataclass(frozen=True)
class KernelConfig:
    """Kernel construction settings.

    ``bandwidth`` is the squared length scale ``t`` in
    ``exp(-|x - y|^2 / (4 t))`` or the string ``"auto"``.  With ``"auto"``
    the selected value is multiplied by ``bandwidth_scale``.
    """

    bandwidth: float | str = "auto"
    alpha: float = 1.0
    knn: int | None = None
    n0: int = 35
    bandwidth_k: int = 8
    bandwidth_scale: float = 1.0

    def __post_init__(self):
        if isinstance(self.bandwidth, str):
            if self.bandwidth != "auto":
                raise InvalidArgument(f"bandwidth must be positive or 'auto', got {self.bandwidth!r}")
        elif not self.bandwidth > 0:
            raise InvalidArgument(f"bandwidth must be positive, got {self.bandwidth!r}")
        if not 0.0 <= self.alpha <= 1.0:
            raise InvalidArgument(f"alpha must lie in [0, 1], got {self.alpha!r}")
        if self.knn is not None and self.knn < 1:
            raise InvalidArgument(f"knn must be >= 1, got {self.knn!r}")
        if not self.bandwidth_scale > 0:
            raise InvalidArgument(f"bandwidth_scale must be positive, got {self.bandwidth_scale!r}")
        if self.n0 < 1:
            raise InvalidArgument(f"n0 must be >= 1, got {self.n0!r}")


@dataclass(frozen=True, eq=False)
class MarkovOperator:
    """Renormalised symmetric kernel and the Markov chain it defines.

    ``kernel`` holds ``K_ij / (q_i^a q_j^a)``; the transition matrix is its
    row normalisation and is built on request to avoid a second ``n x n``
    copy.
    """

    kernel: np.ndarray | sp.csr_matrix
    degree: np.ndarray
    bandwidth: float
    alpha: float

    @property
    def n(self) -> int:
        return self.degree.shape[0]

    @property
    def density(self) -> np.ndarray:
        """Stationary density of the chain scaled to mean one."""
        return self.n * self.degree / self.degree.sum()

    @property
    def transition(self):
        inv = 1.0 / self.degree
        if sp.issparse(self.kernel):
            return sp.diags(inv) @ self.kernel
        return self.kernel * inv[:, None]

    def generator(self):
        """``L = (I - P) / t`` as a dense matrix (positive semi-definite convention)."""
        P = self.transition
        P = P.toarray() if sp.issparse(P) else P
        return (np.eye(self.n) - P) / self.bandwidth


@dataclass(frozen=True, eq=False)
class SpectralBasis:
    """Truncated eigensystem of the estimated generator.

    ``phi[:, i]`` are eigenfunctions sampled at the points, orthonormal for
    the weighted mean ``(1/n) sum_s phi_i phi_j D``.  ``phi[:, 0]`` is the
    constant one and ``eigenvalues[0]`` is exactly zero.
    """

    eigenvalues: np.ndarray
    phi: np.ndarray
    density: np.ndarray
    bandwidth: float

    @property
    def n(self) -> int:
        return self.phi.shape[0]

    @property
    def n0(self) -> int:
        return self.phi.shape[1]

    @property
    def phi0(self) -> float:
        return float(self.phi[0, 0])

    def weights(self) -> np.ndarray:
        """Quadrature weights ``D / n`` of the sample measure."""
        return self.density / self.n


def select_bandwidth(pc: PointCloud, method="mean-knn", k=8) -> float:
    """Half the mean squared distance to the ``k``-th nearest neighbour."""
    if pc.n < 2:
        raise InvalidArgument("bandwidth selection needs at least two points")
    if method != "mean-knn":
        raise InvalidArgument(f"unknown bandwidth method {method!r}")
    k = min(int(k), pc.n - 1)
    if k < 1:
        raise InvalidArgument("k must be >= 1")
    dist, _ = cKDTree(pc.points).query(pc.points, k + 1)
    t = 0.5 * float(np.mean(dist[:, k] ** 2))
    if not t > 0:
        raise InvalidArgument("zero bandwidth: the cloud has no distinct neighbours")
    return t


def _resolve_bandwidth(pc, cfg):
    if cfg.bandwidth == "auto":
        if pc.n < 2:
            return 1.0
        return cfg.bandwidth_scale * select_bandwidth(pc, k=cfg.bandwidth_k)
    return float(cfg.bandwidth)


def build_markov(pc: PointCloud, cfg: KernelConfig = KernelConfig()) -> MarkovOperator:
    """Gaussian kernel with ``alpha`` density renormalisation."""
    t = _resolve_bandwidth(pc, cfg)
    n = pc.n
    if cfg.knn is not None:
        if cfg.knn >= n:
            raise InvalidArgument(f"knn must be below n={n}, got {cfg.knn}")
        dist, idx = cKDTree(pc.points).query(pc.points, cfg.knn + 1)
        rows = np.repeat(np.arange(n), cfg.knn + 1)
        vals = np.exp(-(dist.ravel() ** 2) / (4 * t))
        K = sp.csr_matrix((vals, (rows, idx.ravel())), shape=(n, n))
        K = K.maximum(K.T).tocsr()
        q = np.asarray(K.sum(axis=1)).ravel()
        scale = q ** -cfg.alpha
        K = (sp.diags(scale) @ K @ sp.diags(scale)).tocsr()
        degree = np.asarray(K.sum(axis=1)).ravel()
    else:
        K = cdist(pc.points, pc.points, "sqeuclidean")
        K *= -1.0 / (4 * t)
        np.exp(K, out=K)
        q = K.sum(axis=1)
        scale = q ** -cfg.alpha
        K *= scale[:, None]
        K *= scale[None, :]
        degree = K.sum(axis=1)
    return MarkovOperator(K, degree, t, cfg.alpha)


def _fix_signs(phi):
    idx = np.argmax(np.abs(phi), axis=0)
    signs = np.sign(phi[idx, np.arange(phi.shape[1])])
    signs[signs == 0] = 1.0
    return phi * signs


def spectral_basis(op: MarkovOperator, n0: int) -> SpectralBasis:
    """Top ``n0`` eigenpairs of the chain, converted to generator eigenpairs."""
    n = op.n
    if not 1 <= n0 <= n:
        raise InvalidArgument(f"n0 must lie in [1, {n}], got {n0}")
    s = 1.0 / np.sqrt(op.degree)
    try:
        if sp.issparse(op.kernel) and n0 < n - 1:
            A = (sp.diags(s) @ op.kernel @ sp.diags(s)).tocsr()
            eta, u = spla.eigsh(A, k=n0, which="LA", tol=1e-12)
            order = np.argsort(eta)
            eta, u = eta[order], u[:, order]
        else:
            K = op.kernel.toarray() if sp.issparse(op.kernel) else op.kernel
            A = K * s[:, None]
            A *= s[None, :]
            eta, u = sla.eigh(
                A, subset_by_index=[n - n0, n - 1], driver="evr", overwrite_a=True, check_finite=False
            )
    except (np.linalg.LinAlgError, spla.ArpackError) as exc:
        raise NumericError(
            f"eigensolver failed for n={n}, n0={n0}, bandwidth={op.bandwidth:.4g}, "
            f"degree range [{op.degree.min():.3g}, {op.degree.max():.3g}]: {exc}"
        ) from exc
    eta, u = eta[::-1], np.array(u[:, ::-1])
    # On a disconnected cloud the top eigenvalue is repeated and the solver
    # returns an arbitrary basis of that eigenspace.  Put the stationary
    # vector first and re-orthonormalise the rest of the block against it.
    block = np.flatnonzero(eta >= eta[0] - 1e-10 * max(abs(eta[0]), 1.0))
    if len(block) > 1:
        U = u[:, block]
        U[:, 0] = np.sqrt(op.degree)
        Q, _ = np.linalg.qr(U)
        u[:, block] = Q
    lam = np.maximum((1.0 - eta) / op.bandwidth, 0.0)
    lam[0] = 0.0
    lam = np.maximum.accumulate(lam)
    D = op.density
    phi = u * s[:, None]
    phi /= np.sqrt(np.mean(phi**2 * D[:, None], axis=0))
    phi[:, 0] = 1.0
    phi = _fix_signs(phi)
    return SpectralBasis(lam, np.ascontiguousarray(phi), D, op.bandwidth)


def estimate_basis(pc: PointCloud, cfg: KernelConfig = KernelConfig()) -> SpectralBasis:
    """Convenience wrapper: ``spectral_basis(build_markov(pc, cfg), cfg.n0)``."""
    n0 = min(cfg.n0, pc.n)
    return spectral_basis(build_markov(pc, cfg), n0)


def save_basis(basis: SpectralBasis, path) -> None:
    """Store the basis as a compressed ``.npz`` bundle."""
    with open(Path(path), "wb") as fh:
        np.savez(
            fh,
            eigenvalues=basis.eigenvalues,
            phi=basis.phi,
            density=basis.density,
            bandwidth=np.array(basis.bandwidth),
            n=np.array(basis.n),
        )


def load_basis(path) -> SpectralBasis:
    with np.load(Path(path)) as z:
        return SpectralBasis(z["eigenvalues"], z["phi"], z["density"], float(z["bandwidth"]))
