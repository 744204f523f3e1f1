"""Lie bracket, Hessian, Levi-Civita connection (Koszul) and curvature.

Vector fields are carried as their flat 1-forms in the calculus' default
1-form space; ``sharp`` turns them into action matrices when needed.
"""

from __future__ import annotations

import numpy as np

from .algebra import carre, expand
from .errors import InvalidArgument
from .exterior import VectorField, flat, gradient, metric_pointwise, sharp
from .frames import FormCalculus, FormCoeffs, _wedge_table

__all__ = [
    "lie_bracket",
    "hessian_eval",
    "covariant_derivative",
    "covariant_derivative_function",
    "second_cov",
    "second_cov_function",
    "riemann",
]


def _check(*forms):
    space = forms[0].space
    for f in forms:
        if f.degree != 1:
            raise InvalidArgument("vector fields must be given as 1-forms")
        if f.space is not space:
            raise InvalidArgument("vector fields must share one 1-form space")
    if space.calculus is None:
        raise InvalidArgument("form space is not attached to a FormCalculus")
    return space.calculus


def _bracket_weak(MX, MY, frame):
    C = MX @ MY - MY @ MX
    return C[frame[:, 0], frame[:, 1]]


def lie_bracket(v: FormCoeffs, w: FormCoeffs) -> FormCoeffs:
    """``[v, w] = (G1)^+ (G1 v o G1 w - G1 w o G1 v)``."""
    _check(v, w)
    space = v.space
    return FormCoeffs(space, space.pinv(_bracket_weak(sharp(v).matrix, sharp(w).matrix, space.frame)))


def hessian_eval(f, X: FormCoeffs, Y: FormCoeffs) -> np.ndarray:
    """Function coefficients of ``H(f)(X, Y)``."""
    calc = _check(X, Y)
    df = gradient(calc, f)
    if df.space is not X.space:
        raise InvalidArgument("fields must live in the default 1-form space")
    t1 = metric_pointwise(X, lie_bracket(Y, df))
    t2 = metric_pointwise(Y, lie_bracket(X, df))
    f_full = np.zeros(calc.n0)
    f_full[: len(f)] = f
    t3 = carre(f_full, metric_pointwise(X, Y), calc.algebra.gamma)
    return 0.5 * (t1 + t2 + t3)


def _frame_metric(calc: FormCalculus, Y: FormCoeffs) -> np.ndarray:
    """Coefficients of ``g(Y, Z_J)`` for every frame element ``Z_J`` (``n0 x N``)."""
    alg = calc.algebra
    phi = alg.phi
    fr = Y.space.frame
    wedges, inv = _wedge_table(fr)
    coef = np.zeros((Y.space.ncoef, len(wedges)))
    np.add.at(coef, (fr[:, 0], inv), Y.v)
    A = phi[:, : Y.space.ncoef] @ coef
    m = int(fr.max()) + 1
    gh = alg.gamma_hat(m)
    gY = np.einsum("xp,xpb->xb", A, gh[:, wedges[:, 0], :])
    vals = phi[:, fr[:, 0]] * gY[:, fr[:, 1]]
    return expand(vals, alg.basis, calc.n0)


def _frame_matrices(space) -> np.ndarray:
    """Action matrices of every frame element, shape ``N x n0 x n0``."""
    calc = space.calculus
    fr = space.frame
    M = np.zeros((space.N, calc.n0, calc.n0))
    M[:, fr[:, 0], fr[:, 1]] = space.gram
    return M


def covariant_derivative_weak(X: FormCoeffs, Y: FormCoeffs) -> np.ndarray:
    """``<nabla_X Y, Z_J>`` for each frame element via the Koszul formula."""
    calc = _check(X, Y)
    space = X.space
    fr = space.frame
    G = space.gram
    MX, MY = sharp(X).matrix, sharp(Y).matrix
    MZ = _frame_matrices(space)

    gYZ = _frame_metric(calc, Y)
    gZX = _frame_metric(calc, X)
    gXY = metric_pointwise(X, Y)
    phi0 = calc.algebra.c.phi0

    t1 = (MX[0] @ gYZ) / phi0
    t2 = (MY[0] @ gZX) / phi0
    t3 = -(MZ[:, 0, :] @ gXY) / phi0
    t4 = G @ lie_bracket(X, Y).v
    Gx, Gy = G @ X.v, G @ Y.v
    t5 = np.empty(space.N)
    t6 = np.empty(space.N)
    for J in range(space.N):
        t5[J] = -Gx @ space.pinv(_bracket_weak(MY, MZ[J], fr))
        t6[J] = Gy @ space.pinv(_bracket_weak(MZ[J], MX, fr))
    return 0.5 * (t1 + t2 + t3 + t4 + t5 + t6)


def covariant_derivative(X: FormCoeffs, Y: FormCoeffs) -> FormCoeffs:
    """Flat of ``nabla_X Y``."""
    space = X.space
    return FormCoeffs(space, space.pinv(covariant_derivative_weak(X, Y)))


def covariant_derivative_function(X: FormCoeffs, f) -> np.ndarray:
    """``nabla_X f = X(f)`` as function coefficients."""
    _check(X)
    return sharp(X).matrix[:, : len(f)] @ np.asarray(f, dtype=float)


def second_cov(X: FormCoeffs, Y: FormCoeffs, Z: FormCoeffs) -> FormCoeffs:
    """``nabla^2_{X,Y} Z = nabla_X nabla_Y Z - nabla_{nabla_X Y} Z``."""
    _check(X, Y, Z)
    return covariant_derivative(X, covariant_derivative(Y, Z)) - covariant_derivative(covariant_derivative(X, Y), Z)


def second_cov_function(X: FormCoeffs, Y: FormCoeffs, f) -> np.ndarray:
    """``nabla^2_{X,Y} f = X(Y f) - (nabla_X Y) f``."""
    _check(X, Y)
    f = np.asarray(f, dtype=float)
    MX, MY = sharp(X).matrix, sharp(Y).matrix
    MW = sharp(covariant_derivative(X, Y)).matrix
    n = len(f)
    return MX @ (MY[:, :n] @ f) - MW[:, :n] @ f


def riemann(X: FormCoeffs, Y: FormCoeffs, Z: FormCoeffs) -> FormCoeffs:
    """``R(X, Y) Z = nabla_X nabla_Y Z - nabla_Y nabla_X Z - nabla_[X,Y] Z``."""
    _check(X, Y, Z)
    a = covariant_derivative(X, covariant_derivative(Y, Z))
    b = covariant_derivative(Y, covariant_derivative(X, Z))
    return a - b - covariant_derivative(lie_bracket(X, Y), Z)


def as_field(v: FormCoeffs) -> VectorField:
    return sharp(v)


def from_field(X: VectorField, calc: FormCalculus) -> FormCoeffs:
    return flat(X, calc=calc)
