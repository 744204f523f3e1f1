"""Stage timings for the full pipeline on torus samples of growing size."""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass

import numpy as np

from .algebra import build_algebra
from .errors import InvalidArgument
from .frames import FormCalculus, TruncationConfig
from .hodge import assemble, solve
from .kernel import KernelConfig, build_markov, spectral_basis
from .synth import gen_torus

__all__ = ["BenchResult", "STAGES", "run_bench", "loglog_slope", "write_bench"]

STAGES = ("kernel", "eigensolve", "tensors", "hodge")


@dataclass(frozen=True, eq=False)
class BenchResult:
    sizes: tuple
    times: np.ndarray  # (len(sizes), reps, len(STAGES)) seconds
    kernel: KernelConfig
    trunc: TruncationConfig

    def mean(self, stage: str) -> np.ndarray:
        return self.times[:, :, STAGES.index(stage)].mean(axis=1)

    def std(self, stage: str) -> np.ndarray:
        return self.times[:, :, STAGES.index(stage)].std(axis=1)

    def summary(self) -> dict:
        out = {
            "sizes": list(self.sizes),
            "reps": int(self.times.shape[1]),
            "n0": self.trunc.n0,
            "n1": self.trunc.n1,
            "n2": self.trunc.n2,
            "stages": {s: {"mean": self.mean(s).tolist(), "std": self.std(s).tolist()} for s in STAGES},
        }
        if len(self.sizes) > 1:
            out["eigensolve_slope"] = loglog_slope(self.sizes, self.mean("eigensolve"))
            h = self.mean("hodge")
            out["hodge_ratio"] = float(h.max() / h.min())
        return out


def loglog_slope(sizes, times) -> float:
    """Least-squares slope of ``log t`` against ``log n``."""
    return float(np.polyfit(np.log(np.asarray(sizes, float)), np.log(np.asarray(times, float)), 1)[0])


def _timed(fn):
    t0 = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - t0


def run_bench(
    sizes,
    reps: int = 1,
    kernel: KernelConfig = KernelConfig(),
    trunc: TruncationConfig = TruncationConfig(),
    degree: int = 1,
    seed: int = 0,
    progress=None,
) -> BenchResult:
    """Time each stage for torus samples of the given sizes.

    The torus has radii 2 and 1.  Sample generation is excluded from the
    timings.  ``progress`` is called as ``progress(n, rep, stage_times)``.
    """
    sizes = tuple(int(s) for s in sizes)
    if not sizes or any(s < 2 for s in sizes):
        raise InvalidArgument("sizes must be integers >= 2")
    if list(sizes) != sorted(sizes):
        raise InvalidArgument("sizes must be ascending")
    if reps < 1:
        raise InvalidArgument("reps must be >= 1")
    times = np.zeros((len(sizes), reps, len(STAGES)))
    for a, n in enumerate(sizes):
        n0 = min(trunc.n0, n)
        tr = TruncationConfig(n0, min(trunc.n1, n0), min(trunc.n2, n0 - 1))
        for r in range(reps):
            pc = gen_torus(n, 2.0, 1.0, 0.0, seed + r)
            op, t_k = _timed(lambda: build_markov(pc, kernel))
            basis, t_e = _timed(lambda: spectral_basis(op, n0))
            del op
            alg, t_t = _timed(lambda: build_algebra(basis))

            def hodge():
                calc = FormCalculus(alg, tr)
                return solve(assemble(calc, degree))

            _, t_h = _timed(hodge)
            times[a, r] = (t_k, t_e, t_t, t_h)
            if progress is not None:
                progress(n, r, times[a, r])
    return BenchResult(sizes, times, kernel, trunc)


def write_bench(result: BenchResult, csv_path, json_path, extra: dict | None = None) -> None:
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["n", *(f"{s}_mean" for s in STAGES), *(f"{s}_std" for s in STAGES)])
        for i, n in enumerate(result.sizes):
            w.writerow([n, *(repr(float(result.mean(s)[i])) for s in STAGES), *(repr(float(result.std(s)[i])) for s in STAGES)])
    payload = dict(extra or {})
    payload.update(result.summary())
    with open(json_path, "w") as fh:
        json.dump(payload, fh, indent=2)
