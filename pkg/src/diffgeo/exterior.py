"""Pointwise metric, wedge, d, codifferential, musical maps, interior product."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .algebra import expand
from .errors import InvalidArgument
from .frames import FormCalculus, FormCoeffs, FormSpace, _wedge_table, pointwise_dets

__all__ = [
    "VectorField",
    "metric_values",
    "metric_pointwise",
    "wedge",
    "ext_derivative_weak",
    "ext_derivative",
    "codifferential",
    "sharp",
    "flat",
    "interior_product",
    "vf_apply",
    "function_form",
    "gradient",
]


def _calc(form: FormCoeffs) -> FormCalculus:
    calc = form.space.calculus
    if calc is None:
        raise InvalidArgument("form space is not attached to a FormCalculus")
    return calc


def function_form(calc: FormCalculus, f) -> FormCoeffs:
    """Wrap function coefficients as a 0-form."""
    space = calc.space(0)
    v = np.zeros(space.N)
    f = np.asarray(f, dtype=float)
    v[: len(f)] = f
    return FormCoeffs(space, v)


def _by_wedge(form: FormCoeffs, phi):
    """Point values of ``sum_{i0} a_(i0,p) phi_i0`` for each wedge tuple ``p``."""
    frame = form.space.frame
    if form.degree == 0:
        return np.empty((1, 0), dtype=int), (phi[:, frame[:, 0]] @ form.v)[:, None]
    wedges, inv = _wedge_table(frame)
    coef = np.zeros((form.space.ncoef, len(wedges)))
    np.add.at(coef, (frame[:, 0], inv), form.v)
    return wedges, phi[:, : form.space.ncoef] @ coef


def metric_values(alpha: FormCoeffs, beta: FormCoeffs) -> np.ndarray:
    """``g(alpha, beta)`` at every sample point."""
    if alpha.degree != beta.degree:
        raise InvalidArgument(f"degree mismatch: {alpha.degree} vs {beta.degree}")
    calc = _calc(alpha)
    phi = calc.algebra.phi
    wa, A = _by_wedge(alpha, phi)
    wb, B = _by_wedge(beta, phi)
    if alpha.degree == 0:
        return A[:, 0] * B[:, 0]
    m = int(max(wa.max(), wb.max())) + 1
    dets = pointwise_dets(calc.algebra.gamma_hat(m), wa, wb)
    return np.einsum("xp,xq,xpq->x", A, B, dets)


def metric_pointwise(alpha: FormCoeffs, beta: FormCoeffs) -> np.ndarray:
    """Function coefficients of ``g(alpha, beta)``."""
    calc = _calc(alpha)
    return expand(metric_values(alpha, beta), calc.algebra.basis, calc.n0)


def _sort_sign(seq):
    """Sign of the permutation sorting ``seq`` (0 when an index repeats)."""
    seq = list(seq)
    if len(set(seq)) < len(seq):
        return 0, None
    sign = 1
    for i in range(len(seq)):
        for j in range(i + 1, len(seq)):
            if seq[i] > seq[j]:
                sign = -sign
    return sign, tuple(sorted(seq))


def _wedge_core(alpha, beta, target):
    calc = _calc(alpha)
    c = calc.algebra.c.values
    nt = target.ncoef
    wa, ia = _wedge_table(alpha.space.frame)
    wb, ib = _wedge_table(beta.space.frame)
    A = np.zeros((alpha.space.ncoef, len(wa)))
    B = np.zeros((beta.space.ncoef, len(wb)))
    np.add.at(A, (alpha.space.frame[:, 0], ia), alpha.v)
    np.add.at(B, (beta.space.frame[:, 0], ib), beta.v)
    T = np.einsum("ip,jq,ijs->spq", A, B, c[: A.shape[0], : B.shape[0], :nt])
    tw, tinv = _wedge_table(target.frame)
    lookup = {tuple(row): k for k, row in enumerate(tw)}
    pos = np.full((nt, len(tw)), -1)
    pos[target.frame[:, 0], tinv] = np.arange(target.N)
    out = np.zeros(target.N)
    for p, tp in enumerate(wa):
        for q, tq in enumerate(wb):
            sign, key = _sort_sign(tuple(tp) + tuple(tq))
            if sign == 0:
                continue
            if key not in lookup:
                raise InvalidArgument(f"wedge index {key} is outside the target frame")
            out[pos[:, lookup[key]]] += sign * T[:, p, q]
    return out


def wedge(alpha: FormCoeffs, beta: FormCoeffs, target: FormSpace | None = None) -> FormCoeffs:
    """``alpha ^ beta`` expanded into ``target`` (default: the calculus' degree ``k + l`` space).

    Products of coefficient functions are re-expanded through ``c`` and
    truncated to the target's coefficient range.
    """
    calc = _calc(alpha)
    k, l = alpha.degree, beta.degree
    if k + l > calc.trunc.n2:
        raise InvalidArgument(f"wedge degree {k + l} exceeds n2={calc.trunc.n2}")
    if target is None:
        target = calc.space(k + l)
    if target.degree != k + l:
        raise InvalidArgument("target degree must equal k + l")
    if k == l and k % 2 and alpha.space is beta.space and np.array_equal(alpha.v, beta.v):
        return target.zero()
    # Evaluate in a canonical operand order so that the graded
    # antisymmetry holds bit for bit.
    if (k, alpha.v.tobytes()) <= (l, beta.v.tobytes()):
        return FormCoeffs(target, _wedge_core(alpha, beta, target))
    sign = -1.0 if (k * l) % 2 else 1.0
    return FormCoeffs(target, sign * _wedge_core(beta, alpha, target))


def ext_derivative_weak(calc: FormCalculus, k: int, source=None, target=None) -> np.ndarray:
    """Matrix of ``<alpha_I, d alpha_J>`` from degree ``k`` to ``k + 1``."""
    source = source or calc.space(k)
    target = target or calc.space(k + 1)
    return calc.weak_d(source, target)


def ext_derivative(alpha: FormCoeffs, target: FormSpace | None = None) -> FormCoeffs:
    calc = _calc(alpha)
    target = target or calc.space(alpha.degree + 1)
    dw = calc.weak_d(alpha.space, target)
    return FormCoeffs(target, target.pinv(dw @ alpha.v))


def codifferential(alpha: FormCoeffs, target: FormSpace | None = None) -> FormCoeffs:
    k = alpha.degree
    if k == 0:
        raise InvalidArgument("the codifferential of a 0-form is undefined")
    calc = _calc(alpha)
    target = target or calc.space(k - 1)
    dw = calc.weak_d(target, alpha.space)
    return FormCoeffs(target, target.pinv(dw.T @ alpha.v))


def gradient(calc: FormCalculus, f) -> FormCoeffs:
    """``df`` for function coefficients ``f``."""
    return ext_derivative(function_form(calc, f))


@dataclass(frozen=True, eq=False)
class VectorField:
    """Derivation as an ``n0 x n0`` matrix: ``X[k, l]`` is the ``phi_k`` coefficient of ``X(phi_l)``."""

    matrix: np.ndarray

    def __call__(self, f) -> np.ndarray:
        return vf_apply(self, f)

    def __matmul__(self, other: "VectorField") -> np.ndarray:
        return self.matrix @ other.matrix


def vf_apply(X: VectorField, f) -> np.ndarray:
    f = np.asarray(f, dtype=float)
    return X.matrix[:, : f.shape[0]] @ f


def sharp(v: FormCoeffs) -> VectorField:
    if v.degree != 1:
        raise InvalidArgument("sharp takes a 1-form")
    calc = _calc(v)
    M = np.zeros((calc.n0, calc.n0))
    fr = v.space.frame
    M[fr[:, 0], fr[:, 1]] = v.weak()
    return VectorField(M)


def flat(X: VectorField, space: FormSpace | None = None, calc: FormCalculus | None = None) -> FormCoeffs:
    if space is None:
        if calc is None:
            raise InvalidArgument("flat needs a target space or a calculus")
        space = calc.space(1)
    fr = space.frame
    return FormCoeffs(space, space.pinv(X.matrix[fr[:, 0], fr[:, 1]]))


def interior_product(X: VectorField, alpha: FormCoeffs, target: FormSpace | None = None) -> FormCoeffs:
    """``i_X alpha`` by the frame recursion, coefficient products through ``c``."""
    k = alpha.degree
    if k == 0:
        raise InvalidArgument("interior product of a 0-form is zero by definition; pass k >= 1")
    calc = _calc(alpha)
    target = target or calc.space(k - 1)
    c = calc.algebra.c.values
    nt = target.ncoef
    out = np.zeros(target.N)
    if k == 1:
        pos = {(i,): i for i in range(nt)}
    else:
        pos = {tuple(row): n for n, row in enumerate(target.frame)}
    for a, row in zip(alpha.v, alpha.space.frame):
        if a == 0.0:
            continue
        i0, wed = row[0], row[1:]
        for m, j in enumerate(wed):
            prod = c[i0, : calc.n0, :nt].T @ X.matrix[:, j]
            sign = -1.0 if m % 2 else 1.0
            rest = tuple(np.delete(wed, m))
            for s in range(nt):
                out[pos[(s,) + rest]] += sign * a * prod[s]
    return FormCoeffs(target, out)
