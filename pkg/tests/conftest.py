import numpy as np
import pytest

from diffgeo.algebra import build_algebra
from diffgeo.frames import FormCalculus, TruncationConfig
from diffgeo.kernel import KernelConfig, estimate_basis
from diffgeo.synth import gen_torus

# Filled by tests/test_acceptance.py; printed once at the end of the run.
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])


@pytest.fixture(scope="session")
def small_torus():
    """A 400-point torus with its basis, algebra and calculus at (20, 6, 3)."""
    pc = gen_torus(400, 2.0, 1.0, 0.0, seed=11)
    basis = estimate_basis(pc, KernelConfig(n0=20))
    alg = build_algebra(basis)
    calc = FormCalculus(alg, TruncationConfig(20, 6, 3))
    return pc, basis, alg, calc


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
