import numpy as np
import pytest

from diffgeo.algebra import build_algebra, evaluate, expand
from diffgeo.errors import InvalidArgument
from diffgeo.exterior import gradient, metric_pointwise, sharp
from diffgeo.frames import FormCalculus, TruncationConfig
from diffgeo.kernel import KernelConfig, estimate_basis
from diffgeo.second_order import (
    covariant_derivative,
    hessian_eval,
    lie_bracket,
    riemann,
    second_cov,
    second_cov_function,
)
from diffgeo.synth import gen_sphere, gen_square, gen_torus


@pytest.fixture(scope="module")
def torus():
    b = estimate_basis(gen_torus(800, seed=1), KernelConfig(n0=20))
    return FormCalculus(build_algebra(b), TruncationConfig(20, 10, 4))


def _fields(calc, rng, count=3):
    return [gradient(calc, np.r_[0.0, rng.normal(size=3), np.zeros(calc.n0 - 4)]) for _ in range(count)]


def test_bracket_exact_antisymmetry(torus, rng):
    X, Y = _fields(torus, rng, 2)
    assert np.all(lie_bracket(X, X).v == 0)
    assert np.array_equal(lie_bracket(X, Y).v, -lie_bracket(Y, X).v)


def test_hessian_symmetry_and_constants(torus, rng):
    X, Y = _fields(torus, rng, 2)
    f = np.r_[0.0, rng.normal(size=4)]
    a, b = hessian_eval(f, X, Y), hessian_eval(f, Y, X)
    assert np.abs(a - b).max() <= 1e-8 * np.abs(a).max()
    assert np.abs(hessian_eval(np.eye(20)[0], X, Y)).max() <= 1e-8


def test_metric_compatibility(torus, rng):
    phi0 = torus.algebra.c.phi0
    for _ in range(3):
        X, Y, Z = _fields(torus, rng)
        # integral of X(g(Y, Z)) is the constant coefficient of the derivative
        lhs = (sharp(X).matrix @ metric_pointwise(Y, Z))[0] / phi0
        r = lhs - covariant_derivative(X, Y).inner(Z) - Y.inner(covariant_derivative(X, Z))
        assert abs(r) <= 0.05 * X.norm() * Y.norm() * Z.norm()


def test_torsion_free(torus, rng):
    X, Y = _fields(torus, rng, 2)
    nXY, nYX = covariant_derivative(X, Y), covariant_derivative(Y, X)
    resid = nXY - nYX - lie_bracket(X, Y)
    # the truncated Gram is indefinite, so compare coefficient vectors in its weak image
    assert np.linalg.norm(resid.weak()) <= 1e-3 * np.linalg.norm((nXY - nYX).weak())


def test_second_cov_linear_in_last_slot(torus, rng):
    X, Y, Z = _fields(torus, rng)
    W = _fields(torus, rng, 1)[0]
    lhs = second_cov(X, Y, Z * 2.0 - W).v
    rhs = 2.0 * second_cov(X, Y, Z).v - second_cov(X, Y, W).v
    assert np.abs(lhs - rhs).max() <= 1e-10 * np.abs(rhs).max()


def test_curvature_exact_antisymmetry(torus, rng):
    X, Y, Z = _fields(torus, rng)
    assert np.all(riemann(X, X, Z).v == 0)
    assert np.array_equal(riemann(X, Y, Z).v, -riemann(Y, X, Z).v)


def test_fields_must_be_one_forms(torus):
    with pytest.raises(InvalidArgument):
        lie_bracket(torus.space(2).zero(), torus.space(1).zero())


@pytest.fixture(scope="module")
def square():
    pc = gen_square(1500, 1.0, 0.0, seed=0)
    b = estimate_basis(pc, KernelConfig(n0=20))
    calc = FormCalculus(build_algebra(b), TruncationConfig(20, 20, 19))
    P = pc.points - 0.5
    inner = np.all(np.abs(P) < 0.3, axis=1)
    x, y = expand(P[:, 0], b), expand(P[:, 1], b)
    X, Y = gradient(calc, x), gradient(calc, y)

    def rms(Z):
        M = sharp(Z).matrix
        v = np.stack([evaluate(M @ x, b), evaluate(M @ y, b)], axis=1)[inner]
        return float(np.sqrt(np.mean(np.sum(v**2, axis=1))))

    return dict(b=b, P=P, inner=inner, X=X, Y=Y, rms=rms, scale=rms(X))


def test_flat_hessian_of_square(square):
    b, P, inner = square["b"], square["P"], square["inner"]
    H = evaluate(hessian_eval(expand(P[:, 0] ** 2, b), square["X"], square["X"]), b)[inner]
    assert abs(np.median(H) - 2.0) <= 0.2 * 2.0


def test_second_derivative_matches_hessian(square):
    b, P, inner = square["b"], square["P"], square["inner"]
    X = square["X"]
    f = expand(P[:, 0] ** 2, b)
    H = evaluate(hessian_eval(f, X, X), b)[inner]
    N2 = evaluate(second_cov_function(X, X, f), b)[inner]
    assert np.sqrt(np.mean((N2 - H) ** 2)) <= 0.05 * np.sqrt(np.mean(H**2))


_TRUNCATED_SHARP = "sharp keeps only frame columns, so second-order fields carry truncation ripple"


@pytest.mark.xfail(strict=True, raises=AssertionError, reason=_TRUNCATED_SHARP)
def test_flat_coordinate_fields_commute(square):
    assert square["rms"](lie_bracket(square["X"], square["Y"])) <= 0.05 * square["scale"]


@pytest.mark.xfail(strict=True, raises=AssertionError, reason=_TRUNCATED_SHARP)
def test_flat_coordinate_field_is_parallel(square):
    X = square["X"]
    assert square["rms"](covariant_derivative(X, X)) <= 0.1 * square["scale"]


@pytest.mark.xfail(strict=True, raises=AssertionError, reason=_TRUNCATED_SHARP)
def test_flat_second_covariant_derivative_vanishes(square):
    X, Y = square["X"], square["Y"]
    assert square["rms"](second_cov(X, Y, X)) <= 0.1 * square["scale"]


@pytest.mark.xfail(strict=True, raises=AssertionError, reason=_TRUNCATED_SHARP)
def test_flat_curvature_vanishes(square):
    X, Y = square["X"], square["Y"]
    assert square["rms"](riemann(X, Y, X)) <= 0.1 * square["scale"]


@pytest.mark.xfail(strict=True, raises=AssertionError, reason=_TRUNCATED_SHARP)
def test_sphere_sectional_curvature_is_positive():
    pc = gen_sphere(1500, 1.0, 0.0, seed=0)
    b = estimate_basis(pc, KernelConfig(n0=20))
    calc = FormCalculus(build_algebra(b), TruncationConfig(20, 10, 4))
    X, Y = gradient(calc, np.eye(2)[1]), gradient(calc, np.eye(3)[2])
    e1 = X.normalized()
    e2 = (Y - e1 * e1.inner(Y)).normalized()
    assert riemann(e1, e2, e2).inner(e1) > 0
