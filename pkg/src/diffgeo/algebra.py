"""Function algebra in the eigenbasis: products, carré du champ, transport."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgument
from .kernel import MarkovOperator, SpectralBasis

__all__ = [
    "StructureTensor",
    "CarreTensor",
    "SpectralAlgebra",
    "structure_constants",
    "carre_tensor",
    "build_algebra",
    "multiply",
    "carre",
    "evaluate",
    "expand",
    "carre_discrete",
]

_CHUNK = 4096
_CHUNK_BYTES = 256 * 1024**2


@dataclass(frozen=True, eq=False)
class StructureTensor:
    """``c_ijk = (1/n) sum_s phi_i phi_j phi_k D``, exactly symmetric."""

    values: np.ndarray
    phi0: float

    @property
    def limit(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True, eq=False)
class CarreTensor:
    """``Gamma_ijs = (lambda_i + lambda_j - lambda_s) c_ijs / 2``."""

    values: np.ndarray

    @property
    def limit(self) -> int:
        return self.values.shape[0]


def _symmetrize(c):
    """Copy each entry from its sorted-index representative."""
    m = c.shape[0]
    out = np.empty_like(c)
    J, K = np.indices((m, m))
    for i in range(m):
        idx = np.sort(np.stack([np.full_like(J, i), J, K]), axis=0)
        out[i] = c[idx[0], idx[1], idx[2]]
    return out


def structure_constants(basis: SpectralBasis, limit: int | None = None) -> StructureTensor:
    m = basis.n0 if limit is None else int(limit)
    if not 1 <= m <= basis.n0:
        raise InvalidArgument(f"limit must lie in [1, {basis.n0}], got {limit}")
    phi = basis.phi[:, :m]
    w = basis.weights()
    c = np.zeros((m * m, m))
    step = max(1, min(_CHUNK, _CHUNK_BYTES // (8 * m * m)))
    for start in range(0, basis.n, step):
        blk = phi[start : start + step]
        pair = (blk * w[start : start + step, None])[:, :, None] * blk[:, None, :]
        c += pair.reshape(len(blk), m * m).T @ blk
    return StructureTensor(_symmetrize(c.reshape(m, m, m)), basis.phi0)


def carre_tensor(basis: SpectralBasis, c: StructureTensor) -> CarreTensor:
    m = c.limit
    if m > basis.n0:
        raise InvalidArgument("structure tensor is larger than the basis")
    lam = basis.eigenvalues[:m]
    coef = 0.5 * (lam[:, None, None] + lam[None, :, None] - lam[None, None, :])
    return CarreTensor(coef * c.values)


@dataclass(frozen=True, eq=False)
class SpectralAlgebra:
    """Basis plus its multiplicative and first-order structure."""

    basis: SpectralBasis
    c: StructureTensor
    gamma: CarreTensor
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def n0(self) -> int:
        return self.c.limit

    @property
    def eigenvalues(self) -> np.ndarray:
        return self.basis.eigenvalues[: self.n0]

    @property
    def phi(self) -> np.ndarray:
        return self.basis.phi[:, : self.n0]

    def gamma_hat(self, m: int) -> np.ndarray:
        """Pointwise ``Gamma(phi_a, phi_b)`` for ``a, b < m`` as an ``n x m x m`` array."""
        m = int(m)
        if m > self.n0:
            raise InvalidArgument(f"requested {m} indices, algebra has {self.n0}")
        key = ("gamma_hat", m)
        if key not in self._cache:
            g = self.gamma.values[:m, :m, :].reshape(m * m, self.n0)
            self._cache[key] = (self.phi @ g.T).reshape(-1, m, m)
        return self._cache[key]


def build_algebra(basis: SpectralBasis, limit: int | None = None) -> SpectralAlgebra:
    c = structure_constants(basis, limit)
    return SpectralAlgebra(basis, c, carre_tensor(basis, c))


def _pad(f, m):
    f = np.asarray(f, dtype=float)
    if f.shape[0] > m:
        raise InvalidArgument(f"coefficient vector of length {f.shape[0]} exceeds limit {m}")
    return f


def multiply(f, h, c: StructureTensor) -> np.ndarray:
    """Coefficients of the pointwise product ``f h``."""
    m = c.limit
    f, h = _pad(f, m), _pad(h, m)
    return np.einsum("i,j,ijk->k", f, h, c.values[: len(f), : len(h)])


def carre(f, h, gamma: CarreTensor) -> np.ndarray:
    """Coefficients of ``Gamma(f, h)``."""
    m = gamma.limit
    f, h = _pad(f, m), _pad(h, m)
    return np.einsum("i,j,ijk->k", f, h, gamma.values[: len(f), : len(h)])


def evaluate(f, basis: SpectralBasis) -> np.ndarray:
    """Values of a coefficient vector (or matrix of columns) at the sample points."""
    f = np.asarray(f, dtype=float)
    return basis.phi[:, : f.shape[0]] @ f


def expand(values, basis: SpectralBasis, limit: int | None = None) -> np.ndarray:
    """Weighted projection of point values onto the first ``limit`` eigenfunctions."""
    m = basis.n0 if limit is None else limit
    values = np.asarray(values, dtype=float)
    w = basis.weights()
    if values.ndim == 1:
        return basis.phi[:, :m].T @ (w * values)
    return basis.phi[:, :m].T @ (w[:, None] * values)


def carre_discrete(f_values, h_values, op: MarkovOperator) -> np.ndarray:
    """Pointwise ``(f L h + h L f - L(f h)) / 2`` using ``L = (I - P) / t``.

    Independent of the eigenbasis; used as an oracle.
    """
    f, h = np.asarray(f_values, float), np.asarray(h_values, float)
    P = op.transition

    def L(v):
        return (v - P @ v) / op.bandwidth

    return 0.5 * (f * L(h) + h * L(f) - L(f * h))
