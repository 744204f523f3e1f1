import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from diffgeo.algebra import build_algebra
from diffgeo.errors import InvalidArgument, MissingArtifact
from diffgeo.features import (
    BIOMARKER,
    FeatureConfig,
    FeatureVector,
    biomarker_value,
    build_features,
    features_to_csv,
    pca_project,
)
from diffgeo.frames import FormCalculus, TruncationConfig
from diffgeo.kernel import KernelConfig, estimate_basis
from diffgeo.synth import gen_annulus, gen_circle, gen_infiltration


@pytest.fixture(scope="module")
def annulus():
    pc = gen_annulus(800, 0.5, 1.0, 0.0, seed=0)
    b = estimate_basis(pc, KernelConfig(n0=12))
    return pc, b, FormCalculus(build_algebra(b), TruncationConfig(12, 6, 4))


def test_schedule_length_and_order(annulus):
    _, b, calc = annulus
    cfg = FeatureConfig(f0=4, f1=2, dirichlet=2, inner_products=(2, 2), cup_forms=2, hessian=1)
    fv = build_features(b, cfg, calc=calc)
    expected = 4 + 3 * 4 + 2 + 2 * 2 + 2 + 4 + 1 + 1
    assert len(fv) == expected
    assert fv.names[:2] == ("lambda0_0", "lambda0_1")
    assert np.all(np.isfinite(fv.values))
    again = build_features(b, cfg, calc=calc)
    assert again.names == fv.names and np.array_equal(again.values, fv.values)


def test_empty_config_gives_empty_vector(annulus):
    _, b, _ = annulus
    fv = build_features(b, FeatureConfig(f0=0, heat_times0=()))
    assert len(fv) == 0


def test_form_features_need_a_calculus(annulus):
    _, b, _ = annulus
    with pytest.raises(MissingArtifact, match="forms"):
        build_features(b, FeatureConfig(f1=2))


def test_eigenvalue_features_are_rigid_motion_invariant(annulus):
    pc, b, _ = annulus
    cfg = FeatureConfig(f0=8)
    Q = np.array([[0.0, -1.0], [1.0, 0.0]])
    moved = pc.transformed(rotation=Q, shift=np.array([5.0, -2.0]))
    a = build_features(b, cfg).values
    c = build_features(estimate_basis(moved, KernelConfig(n0=12)), cfg).values
    np.testing.assert_allclose(a, c, atol=1e-8)


def test_normalized_features_are_scale_invariant(annulus):
    pc, b, _ = annulus
    cfg = FeatureConfig(f0=8, normalize=True)
    a = build_features(b, cfg).values
    c = build_features(estimate_basis(pc.transformed(scale=4.0), KernelConfig(n0=12)), cfg).values
    assert np.max(np.abs(a - c) / np.maximum(np.abs(a), 1e-12)) <= 0.05
    raw = FeatureConfig(f0=3, heat_times0=())
    assert build_features(b, raw)["lambda0_1"] != pytest.approx(
        build_features(estimate_basis(pc.transformed(scale=4.0), KernelConfig(n0=12)), raw)["lambda0_1"]
    )


def test_degenerate_spectrum_guard():
    # evenly spaced circle: lambda_1 = lambda_2 exactly up to rounding
    pc = gen_circle(400, 1.0, 0.0, seed=0)
    b = estimate_basis(pc, KernelConfig(n0=10))
    calc = FormCalculus(build_algebra(b), TruncationConfig(10, 6, 4))
    fv = build_features(b, FeatureConfig(f0=3, heat_times0=(), inner_products=(1, 2), hessian=1), calc=calc)
    assert "inner_a0_dphi1" in fv.excluded and "hessian_1_1" in fv.excluded
    assert fv["inner_a0_dphi1"] == 0.0


def test_biomarker_needs_its_schedule(annulus):
    _, b, calc = annulus
    with pytest.raises(MissingArtifact):
        biomarker_value(build_features(b, FeatureConfig(f0=3)))
    assert np.isfinite(biomarker_value(build_features(b, BIOMARKER, calc=calc)))


def test_pca_two_vectors_is_centred():
    a = FeatureVector(("u", "v"), np.array([1.0, 5.0]))
    c = FeatureVector(("u", "v"), np.array([3.0, 2.0]))
    res = pca_project([a, c])
    assert res.scores[0, 0] == pytest.approx(-res.scores[1, 0])


def test_pca_drops_constant_columns():
    vs = [FeatureVector(("u", "k", "v"), np.array([float(i), 1.0, float(i * i)])) for i in range(4)]
    with pytest.warns(RuntimeWarning, match="k"):
        res = pca_project(vs, keep=1)
    assert not res.kept[1] and res.weights[1] == 0.0
    assert np.count_nonzero(res.sparse_weights) == 1


def test_pca_rejects_bad_input():
    v = FeatureVector(("u",), np.array([1.0]))
    with pytest.raises(InvalidArgument):
        pca_project([v])
    with pytest.raises(InvalidArgument):
        pca_project([v, FeatureVector(("w",), np.array([2.0]))])


def test_infiltration_score_is_monotone():
    vectors = []
    for pc in gen_infiltration(8, 600, seed=0):
        b = estimate_basis(pc, KernelConfig(n0=10))
        calc = FormCalculus(build_algebra(b), TruncationConfig(10, 6, 4))
        vectors.append(build_features(b, BIOMARKER, calc=calc))
    with pytest.warns(RuntimeWarning, match="lambda0_0"):
        s = pca_project(vectors).scores[:, 0]
    steps = np.sign(np.diff(s))
    assert max(np.mean(steps > 0), np.mean(steps < 0)) >= 0.9


def test_csv_export(annulus, tmp_path):
    _, b, _ = annulus
    fv = build_features(b, FeatureConfig(f0=2, heat_times0=(1.0,)))
    features_to_csv([fv, fv], tmp_path / "f.csv", labels=["a", "b"])
    lines = (tmp_path / "f.csv").read_text().splitlines()
    assert lines[0] == "label,lambda0_0,lambda0_1,heat0_t1_0,heat0_t1_1"
    assert len(lines) == 3 and lines[1].startswith("a,")


@settings(max_examples=50, deadline=None)
@given(
    f0=st.integers(-3, 10),
    dirichlet=st.integers(-2, 5),
    pair=st.tuples(st.integers(-1, 3), st.integers(-1, 3)),
)
def test_config_validation(f0, dirichlet, pair):
    bad = f0 < 0 or dirichlet < 0 or min(pair) < 0
    if bad:
        with pytest.raises(InvalidArgument):
            FeatureConfig(f0=f0, dirichlet=dirichlet, inner_products=pair)
    else:
        cfg = FeatureConfig(f0=f0, dirichlet=dirichlet, inner_products=pair)
        assert FeatureConfig.from_dict(cfg.to_dict()) == cfg


def test_config_rejects_unknown_keys():
    with pytest.raises(InvalidArgument, match="unknown"):
        FeatureConfig.from_dict({"f0": 2, "heat": 1})
