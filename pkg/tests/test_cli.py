import csv
import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from diffgeo import cli
from diffgeo.errors import InvalidArgument, NumericError
from diffgeo.pipeline import SCHEMA_VERSION, atomic_write, parse_bandwidth

CIRCLE = '{"shape": "circle", "n": 300, "seed": 1, "random_angles": true}'
TORUS = '{"shape": "torus", "n": 3000, "R": 1.3, "r": 1.0, "seed": 0}'


@pytest.fixture(autouse=True)
def _cache(tmp_path, monkeypatch):
    monkeypatch.setenv("DIFFGEO_CACHE_DIR", str(tmp_path / "cache"))


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def _json(path):
    return json.loads(path.read_text())


def test_basis_on_circle(capsys, tmp_path):
    out = tmp_path / "o"
    code, stdout, _ = run(capsys, "basis", "--shape-spec", CIRCLE, "--n0", "9", "--out", str(out))
    assert code == 0
    body = _json(out / "basis.json")
    assert body["schema_version"] == SCHEMA_VERSION
    assert len(body["eigenvalues"]) == 9 and body["eigenvalues"][0] == 0.0
    summary = json.loads(stdout)
    assert summary["n0"] == 9 and "eigenvalues" not in summary


def test_hodge_on_torus_finds_two_loops(capsys, tmp_path):
    out = tmp_path / "o"
    code, stdout, _ = run(
        capsys, "hodge", "--shape-spec", TORUS, "--bandwidth", "10x", "--alpha", "0.5", "--degree", "1", "--out", str(out)
    )
    assert code == 0
    assert json.loads(stdout)["betti"] == 2
    body = _json(out / "hodge.json")
    assert len(body["cup_norms"]) == 2
    with open(out / "hodge_fields.csv") as fh:
        header = next(csv.reader(fh))
    assert header[:3] == ["x0", "x1", "x2"]


@pytest.mark.parametrize("command", ["synth", "basis", "forms", "hodge", "singularity", "features", "curvature"])
def test_every_command_runs_from_a_spec(capsys, tmp_path, command):
    out = tmp_path / command
    code, stdout, err = run(capsys, command, "--shape-spec", CIRCLE, "--n0", "12", "--out", str(out))
    assert code == 0, err
    assert json.loads(stdout)["command"] == command
    assert _json(out / f"{command}.json")["schema_version"] == SCHEMA_VERSION


def test_outputs_are_reproducible_through_the_cache(capsys, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    run(capsys, "forms", "--shape-spec", CIRCLE, "--n0", "12", "--out", str(a))
    code, _, err = run(capsys, "forms", "--shape-spec", CIRCLE, "--n0", "12", "--out", str(b))
    assert code == 0 and "notice" not in err
    assert (a / "forms.json").read_bytes() == (b / "forms.json").read_bytes()
    assert len(list((tmp_path / "cache").glob("basis-*.npz"))) == 1


def test_stale_cache_is_recomputed_with_notice(capsys, tmp_path):
    out = tmp_path / "o"
    run(capsys, "basis", "--shape-spec", CIRCLE, "--n0", "9", "--out", str(out))
    first = (out / "basis.json").read_bytes()
    (side,) = (tmp_path / "cache").glob("basis-*.json")
    side.write_text('{"stage": "basis", "schema_version": 0}')
    code, _, err = run(capsys, "basis", "--shape-spec", CIRCLE, "--n0", "9", "--out", str(out))
    assert code == 0 and "notice" in err and "recomputing" in err
    assert (out / "basis.json").read_bytes() == first


def test_seed_override_changes_the_cloud(capsys, tmp_path):
    run(capsys, "synth", "--shape-spec", CIRCLE, "--out", str(tmp_path / "a"))
    run(capsys, "synth", "--shape-spec", CIRCLE, "--seed", "5", "--out", str(tmp_path / "b"))
    a = np.loadtxt(tmp_path / "a" / "points.csv", delimiter=",", skiprows=1)
    b = np.loadtxt(tmp_path / "b" / "points.csv", delimiter=",", skiprows=1)
    assert a.shape == b.shape and not np.array_equal(a, b)


def test_csv_input(capsys, tmp_path):
    run(capsys, "synth", "--shape-spec", CIRCLE, "--out", str(tmp_path / "s"))
    code, stdout, _ = run(capsys, "basis", "--input", str(tmp_path / "s" / "points.csv"), "--n0", "5", "--out", str(tmp_path / "o"))
    assert code == 0 and json.loads(stdout)["n"] == 300


def test_features_config(capsys, tmp_path):
    code, stdout, _ = run(
        capsys, "features", "--shape-spec", CIRCLE, "--n0", "12", "--config", '{"f0": 3, "heat_times0": [1.0]}', "--out", str(tmp_path)
    )
    assert code == 0 and json.loads(stdout)["n_features"] == 6


@pytest.mark.parametrize(
    "argv",
    [
        ["basis"],
        ["basis", "--shape-spec", CIRCLE, "--input", "x.csv"],
        ["basis", "--input", "/nonexistent/points.csv"],
        ["basis", "--shape-spec", "{not json"],
        ["basis", "--shape-spec", CIRCLE, "--bandwidth", "-2"],
        ["basis", "--shape-spec", CIRCLE, "--n0", "9", "--n1", "12"],
        ["hodge", "--shape-spec", CIRCLE, "--n0", "9", "--degree", "7"],
        ["features", "--shape-spec", CIRCLE, "--n0", "9", "--config", '{"wrong": 1}'],
        ["bench", "--sizes", "400,200"],
    ],
)
def test_invalid_input_exits_with_one(capsys, tmp_path, argv):
    code, _, err = run(capsys, *argv, *([] if argv[0] == "bench" else ["--out", str(tmp_path)]))
    assert code == 1
    assert err.strip()


def test_usage_error_prints_usage(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["basis", "--bogus"])
    assert exc.value.code == 1
    assert "usage:" in capsys.readouterr().err


def test_numeric_failure_exits_with_two(capsys, tmp_path, monkeypatch):
    def boom(*a, **k):
        raise NumericError("eigensolver failed for n=300")

    monkeypatch.setattr("diffgeo.pipeline.estimate_basis", boom)
    code, _, err = run(capsys, "basis", "--shape-spec", CIRCLE, "--out", str(tmp_path))
    assert code == 2 and "numeric failure" in err


def test_bench_single_size(capsys, tmp_path):
    code, stdout, _ = run(capsys, "bench", "--sizes", "100", "--n0", "10", "--out", str(tmp_path))
    assert code == 0
    rows = list(csv.DictReader(open(tmp_path / "bench.csv")))
    assert len(rows) == 1 and rows[0]["n"] == "100"
    assert all(float(rows[0][f"{s}_mean"]) > 0 for s in ("kernel", "eigensolve", "tensors", "hodge"))
    assert _json(tmp_path / "bench.json")["schema_version"] == SCHEMA_VERSION


def test_parse_bandwidth_forms():
    assert parse_bandwidth("auto") == ("auto", 1.0)
    assert parse_bandwidth("3x") == ("auto", 3.0)
    assert parse_bandwidth("0.25") == (0.25, 1.0)
    for bad in ("0", "-1", "x", "0x", "wide"):
        with pytest.raises(InvalidArgument):
            parse_bandwidth(bad)


@given(st.floats(min_value=1e-6, max_value=1e6))
def test_parse_bandwidth_round_trip(t):
    assert parse_bandwidth(repr(t)) == (t, 1.0)
    assert parse_bandwidth(f"{t!r}x") == ("auto", t)


def test_atomic_write(tmp_path):
    p = tmp_path / "d" / "f.json"
    atomic_write(p, b"one")
    atomic_write(p, b"two")
    assert p.read_bytes() == b"two"
    assert [q.name for q in p.parent.iterdir()] == ["f.json"]
