"""Hodge Laplacian on k-forms, harmonic forms, Betti numbers, cup products."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument, MissingArtifact
from .exterior import wedge
from .frames import FormCalculus, FormCoeffs, FormSpace, _check_budget, projector, weighted_det_integral

__all__ = [
    "HodgeOperator",
    "HodgeSpectrum",
    "HodgeDecomposition",
    "GapRule",
    "up_energy",
    "assemble",
    "solve",
    "hodge_spectrum",
    "harmonic_count",
    "harmonic_forms",
    "betti",
    "function_laplacian",
    "hodge_decompose",
    "cup_norm",
]


def up_energy(calc: FormCalculus, space: FormSpace) -> np.ndarray:
    """``U[I, J] = <d alpha_I, d alpha_J>`` by the kernel trick."""
    alg = calc.algebra
    k = space.degree
    fr = space.frame
    if k == 0:
        return np.diag(alg.eigenvalues[fr[:, 0]])
    _check_budget(3 * 8 * space.N**2, f"degree-{k} up energy", calc.budget)
    if k == 1:
        Gam = alg.gamma.values
        i, j = fr[:, 0], fr[:, 1]
        U = np.einsum("IKs,IKs->IK", Gam[i[:, None], i[None, :]], Gam[j[:, None], j[None, :]])
        U -= np.einsum("IKs,IKs->IK", Gam[i[:, None], j[None, :]], Gam[j[:, None], i[None, :]])
    else:
        m = int(fr.max()) + 1
        U = weighted_det_integral(alg, m, fr, fr, None, None, calc.budget)[0, :, 0, :]
    return 0.5 * (U + U.T)


@dataclass(frozen=True, eq=False)
class HodgeOperator:
    """Weak Hodge Laplacian ``up + down`` with the Sobolev Gram ``S = G + up + down``."""

    degree: int
    space: FormSpace
    up: np.ndarray
    down: np.ndarray
    epsilon: float

    @property
    def gram(self) -> np.ndarray:
        return self.space.gram

    @property
    def laplacian(self) -> np.ndarray:
        return self.up + self.down

    @property
    def sobolev(self) -> np.ndarray:
        return self.space.gram + self.up + self.down


def _psd_part(M):
    """Nearest PSD matrix in the Frobenius norm (negative eigenvalues set to zero)."""
    M = 0.5 * (M + M.T)
    w, V = np.linalg.eigh(M)
    if w.min() >= 0.0:
        return M
    out = (V * np.maximum(w, 0.0)) @ V.T
    return 0.5 * (out + out.T)


def assemble(calc: FormCalculus, k: int, epsilon: float | None = None, space: FormSpace | None = None) -> HodgeOperator:
    if epsilon is not None and epsilon < 0:
        raise InvalidArgument("epsilon must be >= 0")
    space = space or calc.space(k)
    # Truncated kernel-trick sums need not be PSD below the full basis;
    # negative directions would surface as spurious harmonic forms.
    up = _psd_part(up_energy(calc, space))
    if k == 0:
        down = np.zeros_like(up)
    else:
        prev = calc.space(k - 1)
        dw = calc.weak_d(prev, space)
        down = _psd_part(dw @ prev.pinv(dw.T))
    if epsilon is None:
        epsilon = 1e-6 * float(np.trace(space.gram + up + down)) / space.N
    return HodgeOperator(k, space, up, down, float(epsilon))


@dataclass(frozen=True, eq=False)
class HodgeSpectrum:
    """Ascending Hodge eigenvalues with G-orthonormal eigenforms (columns of ``vectors``)."""

    degree: int
    eigenvalues: np.ndarray
    vectors: np.ndarray
    space: FormSpace
    epsilon: float
    raw_eigenvalues: np.ndarray
    incomplete: bool = False

    @property
    def forms(self) -> list[FormCoeffs]:
        return [FormCoeffs(self.space, v) for v in self.vectors.T]

    def __len__(self):
        return len(self.eigenvalues)


def solve(op: HodgeOperator, m: int | None = None, tau: float | None = None) -> HodgeSpectrum:
    """Regularised Galerkin eigenproblem ``(L + eps S) v = mu G v``.

    The frame is first orthonormalised for ``S``.  In that basis
    ``B^T L B = I - B^T G B``, so the reduced problem is diagonalised by the
    eigenvectors of ``B^T G B`` (eigenvalues ``g``) with
    ``mu = (1 + eps - g) / g``.  The reported Laplacian eigenvalue folds the
    regulariser back out: ``(mu - eps) / (1 + eps)``.
    """
    tau = op.space.tau if tau is None else tau
    S = op.sobolev
    PS, dinv = projector(S, tau, positive=True)
    B = PS.T * np.sqrt(dinv)
    Gw = B.T @ op.gram @ B
    g, Y = np.linalg.eigh(0.5 * (Gw + Gw.T))
    ok = g > tau * max(g.max(), 0.0)
    g, Y = g[ok], Y[:, ok]
    eps = op.epsilon
    mu = (1.0 + eps - g) / g
    lam = (mu - eps) / (1.0 + eps)
    order = np.argsort(lam, kind="stable")
    lam, g, Y = lam[order], g[order], Y[:, order]
    available = len(lam)
    m = available if m is None else int(m)
    incomplete = m > available
    if incomplete:
        warnings.warn(f"only {available} Hodge eigenpairs available, {m} requested", RuntimeWarning, stacklevel=2)
        m = available
    V = (B @ Y[:, :m]) / np.sqrt(g[:m])
    raw = lam[:m].copy()
    return HodgeSpectrum(op.degree, np.maximum(raw, 0.0), V, op.space, eps, raw, incomplete)


def hodge_spectrum(calc: FormCalculus, k: int, m: int | None = None, epsilon=None) -> HodgeSpectrum:
    return solve(assemble(calc, k, epsilon), m)


@dataclass(frozen=True)
class GapRule:
    """Harmonic cutoff: the largest ratio gap among the first ``candidates`` values.

    A gap counts only when the ratio reaches ``min_ratio``; otherwise no
    harmonic forms are reported.  ``absolute`` switches to a plain threshold.
    """

    candidates: int = 8
    min_ratio: float = 2.5
    absolute: float | None = None


def harmonic_count(values, rule: GapRule = GapRule()) -> int:
    vals = np.maximum(np.asarray(values, dtype=float)[: rule.candidates], 0.0)
    if rule.absolute is not None:
        return int(np.sum(vals <= rule.absolute))
    if len(vals) < 2:
        return 0
    floor = 1e-10 * max(vals.max(), np.finfo(float).tiny)
    ratios = vals[1:] / np.maximum(vals[:-1], floor)
    best = int(np.argmax(ratios))
    return best + 1 if ratios[best] >= rule.min_ratio else 0


def harmonic_forms(spec: HodgeSpectrum, rule: GapRule = GapRule()) -> list[FormCoeffs]:
    if len(spec) == 0:
        raise InvalidArgument("empty spectrum")
    return spec.forms[: harmonic_count(spec.eigenvalues, rule)]


def betti(spec, k: int | None = None, rule: GapRule = GapRule()) -> int:
    """Betti estimate from a HodgeSpectrum, or from function eigenvalues when ``k == 0``."""
    if isinstance(spec, HodgeSpectrum):
        if k is not None and k != spec.degree:
            raise InvalidArgument("k does not match the spectrum degree")
        return harmonic_count(spec.eigenvalues, rule)
    return harmonic_count(spec, rule)


def function_laplacian(calc: FormCalculus) -> np.ndarray:
    """``<d phi_i, d phi_j>`` as resolved by the 1-form frame, ``d~0^T (G1)^+ d~0``."""
    s0, s1 = calc.space(0), calc.space(1)
    dw = calc.weak_d(s0, s1)
    L = dw.T @ s1.pinv(dw)
    return 0.5 * (L + L.T)


@dataclass(frozen=True, eq=False)
class HodgeDecomposition:
    exact: FormCoeffs
    remainder: FormCoeffs
    potential: np.ndarray


def hodge_decompose(alpha: FormCoeffs, rel_tol: float = 1e-8) -> HodgeDecomposition:
    """Split a 1-form into ``df`` and a G-orthogonal remainder, ``f = Lap^+ codiff(alpha)``."""
    if alpha.degree != 1:
        raise InvalidArgument("hodge_decompose takes a 1-form")
    calc = alpha.space.calculus
    if calc is None or alpha.space is not calc.space(1):
        raise InvalidArgument("alpha must live in the calculus' default 1-form space")
    s0, s1 = calc.space(0), alpha.space
    dw = calc.weak_d(s0, s1)
    L = function_laplacian(calc)
    w, V = np.linalg.eigh(L)
    keep = w > rel_tol * w.max()
    f = V[:, keep] @ ((V[:, keep].T @ (dw.T @ alpha.v)) / w[keep])
    exact = FormCoeffs(s1, s1.pinv(dw @ f))
    return HodgeDecomposition(exact, alpha - exact, f)


def cup_norm(h1: FormCoeffs, h2: FormCoeffs, target: FormSpace | None = None) -> float:
    """``|h1 ^ h2|`` for G-normalised 1-forms via the degree-2 Gram.

    The default target keeps all ``n0`` coefficient functions so that the
    product of coefficients is not truncated further.

    The truncated degree-2 Gram can be indefinite, so the result is
    ``sqrt(|<w, w>|)``.  A negative squared norm means the value is below
    the truncation noise floor; it is reported with a warning rather than
    clamped to zero.
    """
    if h1.degree != 1 or h2.degree != 1:
        raise InvalidArgument("cup_norm takes two 1-forms")
    calc = h1.space.calculus
    if calc.trunc.n2 < 2:
        raise MissingArtifact("a degree-2 frame is required: rebuild the calculus with n2 >= 2")
    target = target or calc.space(2, ncoef=calc.n0)
    w = wedge(h1.normalized(), h2.normalized(), target)
    sq = w.inner(w)
    if sq < 0:
        warnings.warn(
            f"cup product has negative squared norm {sq:.3g} under the truncated Gram; "
            "its size is within truncation error",
            RuntimeWarning,
            stacklevel=2,
        )
    return float(np.sqrt(abs(sq)))
