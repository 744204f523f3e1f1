import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from diffgeo.algebra import (
    build_algebra,
    carre,
    carre_discrete,
    evaluate,
    expand,
    multiply,
    structure_constants,
)
from diffgeo.errors import InvalidArgument
from diffgeo.kernel import KernelConfig, build_markov, estimate_basis, spectral_basis
from diffgeo.synth import gen_blob, gen_circle, gen_torus


@pytest.fixture(scope="module")
def circle():
    pc = gen_circle(100, 1.0, 0.0, seed=0)
    b = estimate_basis(pc, KernelConfig(n0=30))
    return pc, b, build_algebra(b)


@pytest.fixture(scope="module")
def full():
    """Full basis on a small blob, where spectral and discrete operators agree."""
    pc = gen_blob(150, 2, seed=4)
    op = build_markov(pc, KernelConfig())
    b = spectral_basis(op, pc.n)
    return op, b, build_algebra(b, limit=pc.n)


def test_structure_constants_triple_loop():
    b = estimate_basis(gen_blob(50, 3, seed=1), KernelConfig(n0=6))
    c = structure_constants(b).values
    w = b.weights()
    ref = np.zeros((6, 6, 6))
    for i in range(6):
        for j in range(6):
            for k in range(6):
                ref[i, j, k] = np.sum(w * b.phi[:, i] * b.phi[:, j] * b.phi[:, k])
    np.testing.assert_allclose(c, ref, atol=1e-13)


def test_constant_function_entries(circle):
    _, b, alg = circle
    c, g = alg.c.values, alg.gamma.values
    assert c[0, 0, 0] == pytest.approx(b.phi0)
    np.testing.assert_allclose(c[:, :, 0], b.phi0 * np.eye(30), atol=1e-8)
    np.testing.assert_allclose(g[0], 0.0, atol=1e-10)
    np.testing.assert_allclose(g[:, :, 0], b.phi0 * np.diag(b.eigenvalues), atol=1e-8)


def test_exact_symmetries(circle):
    _, _, alg = circle
    c, g = alg.c.values, alg.gamma.values
    for p in [(1, 0, 2), (0, 2, 1), (2, 1, 0), (1, 2, 0), (2, 0, 1)]:
        assert np.array_equal(c, c.transpose(p))
    assert np.array_equal(g, g.transpose(1, 0, 2))


@settings(max_examples=20, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=30, max_size=30))
def test_unit_and_zero(circle, f):
    _, b, alg = circle
    e0 = np.zeros(30)
    e0[0] = 1.0
    f = np.asarray(f)
    np.testing.assert_allclose(multiply(e0, f, alg.c), b.phi0 * f, atol=1e-9 * (1 + np.abs(f).max()))
    assert np.all(multiply(f, np.zeros(30), alg.c) == 0)


def test_multiplication_oracle(circle):
    pc, b, alg = circle
    x = expand(pc.points[:, 0], b)
    prod = evaluate(multiply(x, x, alg.c), b)
    ref = evaluate(expand(pc.points[:, 0] ** 2, b), b)
    assert np.linalg.norm(prod - ref) / np.linalg.norm(ref) <= 0.05


@settings(max_examples=20, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=30, max_size=30))
def test_expand_evaluate_round_trip(circle, f):
    _, b, _ = circle
    f = np.asarray(f)
    assert np.abs(expand(evaluate(f, b), b) - f).max() <= 1e-10 * (1 + np.abs(f).max())


def test_evaluate_constant(circle):
    _, b, _ = circle
    v = evaluate(np.eye(30)[0], b)
    assert np.ptp(v) <= 1e-12


def test_coordinate_reconstruction_improves_with_n0():
    pc = gen_torus(600, seed=2)
    b = estimate_basis(pc, KernelConfig(n0=40))
    x = pc.points[:, 0] - pc.points[:, 0].mean()
    errs = [np.linalg.norm(evaluate(expand(x, b, m), b) - x) for m in (5, 10, 20, 40)]
    assert all(a >= b for a, b in zip(errs, errs[1:]))
    assert errs[-1] < 0.5 * errs[0]


def test_carre_matches_discrete_generator(full, rng):
    op, b, alg = full
    f, h = rng.normal(size=b.n0), rng.normal(size=b.n0)
    spectral = evaluate(carre(f, h, alg.gamma), b)
    discrete = carre_discrete(evaluate(f, b), evaluate(h, b), op)
    assert np.abs(spectral - discrete).max() <= 1e-6 * np.abs(discrete).max()


def test_pointwise_positivity(full, rng):
    _, b, alg = full
    for _ in range(5):
        f = rng.normal(size=b.n0)
        g = evaluate(carre(f, f, alg.gamma), b)
        assert g.min() >= -1e-6 * np.abs(g).max()


def test_chain_rule_spot_check():
    pc = gen_circle(1000, 1.0, 0.0, seed=0)
    b = estimate_basis(pc, KernelConfig(n0=40))
    alg = build_algebra(b)
    f, h = np.eye(40)[1], np.eye(40)[4]
    f2 = multiply(f, f, alg.c)
    lhs = evaluate(carre(f2, h, alg.gamma), b)
    rhs = 2 * evaluate(f, b) * evaluate(carre(f, h, alg.gamma), b)
    assert np.linalg.norm(lhs - rhs) / np.linalg.norm(rhs) <= 0.05


def test_limit_and_length_checks(circle):
    _, b, alg = circle
    with pytest.raises(InvalidArgument):
        structure_constants(b, limit=31)
    with pytest.raises(InvalidArgument):
        multiply(np.ones(31), np.ones(3), alg.c)
    with pytest.raises(InvalidArgument):
        alg.gamma_hat(31)
