"""k-form frames, Gram matrices and pseudo-inverses.

A k-form is stored as a coefficient vector against the frame
``phi_{i0} dphi_{j1} ^ ... ^ dphi_{jk}`` with ``i0 < ncoef`` and
``1 <= j1 < ... < jk <= n2``.  The frame is redundant; the Gram matrix
carries the inner product and its null space is quotiented out through a
thresholded pseudo-inverse.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .algebra import SpectralAlgebra
from .errors import DegenerateSpace, InvalidArgument, ResourceError

__all__ = [
    "TruncationConfig",
    "FormSpace",
    "FormCoeffs",
    "FormCalculus",
    "build_frame",
    "gram",
    "projector",
    "pinv_apply",
    "pointwise_dets",
]

DEFAULT_BUDGET = 2 * 1024**3


@dataclass(frozen=True)
class TruncationConfig:
    """``n0`` functions, coefficients below ``n1``, differentials ``1..n2``."""

    n0: int = 35
    n1: int = 10
    n2: int = 4

    def __post_init__(self):
        if self.n0 < 1 or self.n1 < 1 or self.n2 < 0:
            raise InvalidArgument(f"invalid truncation {self}")
        if self.n1 > self.n0:
            raise InvalidArgument(f"n1={self.n1} exceeds n0={self.n0}")
        if self.n2 >= self.n0:
            raise InvalidArgument(f"n2={self.n2} must be below n0={self.n0} (differentials use indices 1..n2)")


def build_frame(k: int, cfg: TruncationConfig, ncoef: int | None = None) -> np.ndarray:
    """Frame index rows ``(i0, j1, ..., jk)`` in lexicographic order."""
    if k < 0 or k > cfg.n2:
        raise InvalidArgument(f"degree {k} outside [0, n2={cfg.n2}]")
    if k == 0:
        return np.arange(cfg.n0 if ncoef is None else ncoef)[:, None]
    nc = cfg.n1 if ncoef is None else ncoef
    wedges = list(combinations(range(1, cfg.n2 + 1), k))
    return np.array([(i,) + w for i in range(nc) for w in wedges], dtype=int)


def _check_budget(nbytes, what, budget):
    if budget is not None and nbytes > budget:
        raise ResourceError(what, int(nbytes), int(budget))


def pointwise_dets(gh, rows, cols, out_chunk=None):
    """Per-point determinants ``det(gh[x][rows[p], cols[q]])``.

    ``gh`` is ``n x m x m``; ``rows`` is ``P x r`` and ``cols`` is ``Q x r``.
    Returns an ``n x P x Q`` array.
    """
    rows, cols = np.atleast_2d(rows), np.atleast_2d(cols)
    r = rows.shape[1]
    if r == 0:
        return np.ones((gh.shape[0], rows.shape[0], cols.shape[0]))
    if r == 1:
        return gh[:, rows[:, 0][:, None], cols[:, 0][None, :]]
    if r == 2:
        a = gh[:, rows[:, 0][:, None], cols[:, 0][None, :]]
        b = gh[:, rows[:, 0][:, None], cols[:, 1][None, :]]
        c = gh[:, rows[:, 1][:, None], cols[:, 0][None, :]]
        d = gh[:, rows[:, 1][:, None], cols[:, 1][None, :]]
        return a * d - b * c
    R = rows[:, None, :, None]
    C = cols[None, :, None, :]
    return np.linalg.det(gh[:, R, C])


def _chunks(n, per_point_bytes, budget):
    size = n if budget is None else max(1, min(n, int(budget // max(per_point_bytes, 1) // 4)))
    for start in range(0, n, size):
        yield slice(start, min(n, start + size))


def weighted_det_integral(alg: SpectralAlgebra, m, rows, cols, coef_rows=None, coef_cols=None, budget=DEFAULT_BUDGET):
    """``sum_x w(x) a(x) b(x) det(gh(x)[rows, cols])`` for coefficient functions.

    ``coef_rows``/``coef_cols`` give the number of leading eigenfunctions
    multiplying the row/column tuple (``None`` means the constant one).  The
    result has shape ``(ncr, P, ncc, Q)`` with singleton axes where a side
    has no coefficient.
    """
    gh = alg.gamma_hat(m)
    w = alg.basis.weights()
    phi = alg.phi
    P, Q = len(rows), len(cols)
    r = np.atleast_2d(rows).shape[1]
    ncr = 1 if coef_rows is None else coef_rows
    ncc = 1 if coef_cols is None else coef_cols
    out = np.zeros((ncr * ncc, P * Q))
    per_point = 8 * P * Q * max(1, r * r) * 2 + 8 * ncr * ncc
    for sl in _chunks(gh.shape[0], per_point, budget):
        dets = pointwise_dets(gh[sl], rows, cols).reshape(-1, P * Q)
        a = w[sl][:, None] * (phi[sl, :ncr] if coef_rows is not None else 1.0)
        a = np.broadcast_to(a, (dets.shape[0], ncr))
        b = phi[sl, :ncc] if coef_cols is not None else np.ones((dets.shape[0], 1))
        ab = (a[:, :, None] * b[:, None, :]).reshape(-1, ncr * ncc)
        out += ab.T @ dets
    return out.reshape(ncr, ncc, P, Q).transpose(0, 2, 1, 3)


def _wedge_table(frame):
    """Unique wedge tuples of a frame and each row's tuple index."""
    if frame.shape[1] == 1:
        return np.zeros((1, 0), dtype=int), np.zeros(frame.shape[0], dtype=int)
    wedges, inverse = np.unique(frame[:, 1:], axis=0, return_inverse=True)
    return wedges, inverse.ravel()


def gram(k: int, frame: np.ndarray, alg: SpectralAlgebra, budget=DEFAULT_BUDGET) -> np.ndarray:
    """Gram matrix ``<alpha_I, alpha_J>`` of a degree-``k`` frame."""
    N = frame.shape[0]
    _check_budget(3 * 8 * N * N, f"degree-{k} Gram ({N} x {N})", budget)
    c = alg.c.values
    if k == 0:
        idx = frame[:, 0]
        G = c[np.ix_(idx, idx)][:, :, 0] / alg.c.phi0
    elif k == 1:
        i, j = frame[:, 0], frame[:, 1]
        Gam = alg.gamma.values
        G = np.einsum("IKs,IKs->IK", c[i[:, None], i[None, :], :], Gam[j[:, None], j[None, :], :])
    else:
        wedges, inv = _wedge_table(frame)
        nc = int(frame[:, 0].max()) + 1
        m = int(wedges.max()) + 1
        full = weighted_det_integral(alg, m, wedges, wedges, nc, nc, budget)
        G = full[frame[:, 0][:, None], inv[:, None], frame[:, 0][None, :], inv[None, :]]
    return 0.5 * (G + G.T)


def projector(G: np.ndarray, tau: float = 1e-8, positive: bool = False):
    """Eigen-directions of ``G`` kept by a relative threshold, and reciprocal eigenvalues.

    By default this is the Moore-Penrose cut ``|w| > tau * max|w|``: truncated
    Gram matrices can be slightly indefinite and dropping their negative
    directions would break ``G G^+ G = G``.  ``positive=True`` keeps only
    ``w > tau * max w``, for matrices that must define an inner product.
    """
    G = np.asarray(G, dtype=float)
    if G.ndim != 2 or G.shape[0] != G.shape[1]:
        raise InvalidArgument(f"Gram matrix must be square, got {G.shape}")
    w, V = np.linalg.eigh(0.5 * (G + G.T))
    if positive:
        top = w.max() if w.size else 0.0
        keep = w > tau * top
    else:
        top = np.abs(w).max() if w.size else 0.0
        keep = np.abs(w) > tau * top
    if not top > 0 or not keep.any():
        raise DegenerateSpace("every Gram eigenvalue lies below the threshold")
    return np.ascontiguousarray(V[:, keep].T), 1.0 / w[keep]


@dataclass(frozen=True, eq=False)
class FormSpace:
    """A frame with its Gram matrix and pseudo-inverse data."""

    degree: int
    frame: np.ndarray
    gram: np.ndarray
    tau: float
    P: np.ndarray
    dinv: np.ndarray
    ncoef: int
    calculus: "FormCalculus | None" = field(default=None, repr=False)

    @property
    def N(self) -> int:
        return self.frame.shape[0]

    @property
    def rank(self) -> int:
        return self.P.shape[0]

    def pinv(self, w):
        """Apply ``G^+ = P^T diag(dinv) P`` to a vector or to columns of a matrix."""
        w = np.asarray(w, dtype=float)
        if w.ndim == 1:
            return self.P.T @ (self.dinv * (self.P @ w))
        return self.P.T @ (self.dinv[:, None] * (self.P @ w))

    def inner(self, a, b) -> float:
        return float(np.asarray(a) @ self.gram @ np.asarray(b))

    def form(self, v) -> "FormCoeffs":
        return FormCoeffs(self, v)

    def zero(self) -> "FormCoeffs":
        return FormCoeffs(self, np.zeros(self.N))

    def element(self, *index) -> "FormCoeffs":
        """Single frame element ``phi_{i0} dphi_{j1} ^ ...`` as a form."""
        rows = np.flatnonzero(np.all(self.frame == np.asarray(index), axis=1))
        if rows.size != 1:
            raise InvalidArgument(f"{index} is not a frame index of this degree-{self.degree} space")
        v = np.zeros(self.N)
        v[rows[0]] = 1.0
        return FormCoeffs(self, v)

    def index_of(self, *index) -> int:
        rows = np.flatnonzero(np.all(self.frame == np.asarray(index), axis=1))
        if rows.size != 1:
            raise InvalidArgument(f"{index} is not a frame index")
        return int(rows[0])


def pinv_apply(space: FormSpace, w):
    return space.pinv(w)


@dataclass(frozen=True, eq=False)
class FormCoeffs:
    """A form as coefficients against the frame of ``space``."""

    space: FormSpace
    v: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.v, dtype=float)
        if v.shape != (self.space.N,):
            raise InvalidArgument(f"coefficient length {v.shape} does not match frame size {self.space.N}")
        object.__setattr__(self, "v", v)

    @property
    def degree(self) -> int:
        return self.space.degree

    def _same(self, other):
        if not isinstance(other, FormCoeffs) or other.space is not self.space:
            raise InvalidArgument("forms live in different spaces")
        return other

    def __add__(self, other):
        return FormCoeffs(self.space, self.v + self._same(other).v)

    def __sub__(self, other):
        return FormCoeffs(self.space, self.v - self._same(other).v)

    def __neg__(self):
        return FormCoeffs(self.space, -self.v)

    def __mul__(self, s):
        return FormCoeffs(self.space, self.v * float(s))

    __rmul__ = __mul__

    def __truediv__(self, s):
        return FormCoeffs(self.space, self.v / float(s))

    def weak(self) -> np.ndarray:
        """``G v``: pairings with every frame element."""
        return self.space.gram @ self.v

    def inner(self, other) -> float:
        return self.space.inner(self.v, self._same(other).v)

    def norm(self) -> float:
        return float(np.sqrt(max(self.inner(self), 0.0)))

    def normalized(self) -> "FormCoeffs":
        nrm = self.norm()
        if nrm == 0:
            raise InvalidArgument("cannot normalise a zero-norm form")
        return self / nrm

    def reduced(self) -> "FormCoeffs":
        """Canonical representative ``G^+ G v`` (null component removed)."""
        return FormCoeffs(self.space, self.space.pinv(self.weak()))


class FormCalculus:
    """Lazily builds and caches form spaces and weak derivatives for one algebra."""

    def __init__(self, algebra: SpectralAlgebra, trunc: TruncationConfig | None = None, tau=1e-8, budget=DEFAULT_BUDGET):
        trunc = trunc or TruncationConfig(algebra.n0, min(10, algebra.n0), min(4, algebra.n0 - 1))
        if trunc.n0 > algebra.n0:
            raise InvalidArgument(f"truncation n0={trunc.n0} exceeds algebra size {algebra.n0}")
        if not tau > 0:
            raise InvalidArgument("tau must be positive")
        self.algebra = algebra
        self.trunc = trunc
        self.tau = float(tau)
        self.budget = budget
        self._spaces: dict = {}
        self._weak: dict = {}

    @property
    def n0(self) -> int:
        return self.trunc.n0

    def space(self, k: int, ncoef: int | None = None) -> FormSpace:
        nc = (self.trunc.n0 if k == 0 else self.trunc.n1) if ncoef is None else int(ncoef)
        if not 1 <= nc <= self.trunc.n0:
            raise InvalidArgument(f"coefficient range {nc} outside [1, {self.trunc.n0}]")
        key = (k, nc)
        if key not in self._spaces:
            frame = build_frame(k, self.trunc, nc)
            G = gram(k, frame, self.algebra, self.budget)
            P, dinv = projector(G, self.tau)
            self._spaces[key] = FormSpace(k, frame, G, self.tau, P, dinv, nc, self)
        return self._spaces[key]

    def weak_d(self, source: FormSpace, target: FormSpace) -> np.ndarray:
        """``d~[I, J] = <target_I, d source_J>``."""
        if target.degree != source.degree + 1:
            raise InvalidArgument("target degree must be source degree + 1")
        key = (source.degree, source.ncoef, target.ncoef)
        if key in self._weak:
            return self._weak[key]
        Tf = target.frame
        if source.degree == 0:
            Gam = self.algebra.gamma.values
            j = source.frame[:, 0]
            D = Gam[Tf[:, 1][:, None], j[None, :], Tf[:, 0][:, None]]
        else:
            _check_budget(8 * target.N * source.N, "weak exterior derivative", self.budget)
            wedges, inv = _wedge_table(Tf)
            m = int(max(source.frame.max(), wedges.max())) + 1
            full = weighted_det_integral(
                self.algebra, m, wedges, source.frame, target.ncoef, None, self.budget
            )
            D = full[Tf[:, 0], inv, 0, :]
        self._weak[key] = D
        return D
