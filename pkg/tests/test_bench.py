import csv
import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from diffgeo.bench import STAGES, loglog_slope, run_bench, write_bench
from diffgeo.errors import InvalidArgument
from diffgeo.frames import TruncationConfig
from diffgeo.kernel import KernelConfig

SMALL = TruncationConfig(8, 4, 3)


def test_two_sizes_report_slope_and_ratio():
    seen = []
    res = run_bench([60, 120], reps=2, kernel=KernelConfig(n0=8), trunc=SMALL, progress=lambda n, r, t: seen.append((n, r)))
    assert res.times.shape == (2, 2, len(STAGES))
    assert np.all(res.times > 0)
    assert seen == [(60, 0), (60, 1), (120, 0), (120, 1)]
    s = res.summary()
    assert s["reps"] == 2 and np.isfinite(s["eigensolve_slope"]) and s["hodge_ratio"] >= 1.0


def test_single_size_has_no_slope():
    s = run_bench([50], trunc=SMALL).summary()
    assert "eigensolve_slope" not in s and s["sizes"] == [50]


def test_truncation_is_clamped_to_small_clouds():
    res = run_bench([6], trunc=TruncationConfig(35, 35, 4))
    assert res.times.shape == (1, 1, 4)


@pytest.mark.parametrize("sizes,reps", [([], 1), ([1], 1), ([200, 100], 1), ([100], 0)])
def test_validation(sizes, reps):
    with pytest.raises(InvalidArgument):
        run_bench(sizes, reps=reps)


@given(st.floats(0.5, 4.0), st.floats(1e-6, 1.0))
def test_slope_of_exact_power_law(p, c):
    n = np.array([100, 200, 400, 800])
    assert loglog_slope(n, c * n**p) == pytest.approx(p, abs=1e-9)


def test_write_bench(tmp_path):
    res = run_bench([40, 80], trunc=SMALL)
    write_bench(res, tmp_path / "b.csv", tmp_path / "b.json", extra={"tag": "x"})
    rows = list(csv.DictReader(open(tmp_path / "b.csv")))
    assert [r["n"] for r in rows] == ["40", "80"]
    assert float(rows[1]["hodge_mean"]) == res.mean("hodge")[1]
    body = json.loads((tmp_path / "b.json").read_text())
    assert body["tag"] == "x" and set(body["stages"]) == set(STAGES)
