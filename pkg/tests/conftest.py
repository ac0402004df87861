import math
import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from anisotrap.fockspace import FockBasis  # noqa: E402
from anisotrap.trap import EffectiveModel, geometry_for_ratio  # noqa: E402

AMU = 1.66053906660e-27
CA40 = 40 * AMU
NU_A = 2 * math.pi * 1e6
K_729 = 2 * math.pi / 729e-9
RABI = 2 * math.pi * 50e3
ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
CANONICAL_CFG = os.path.join(ROOT, "configs", "canonical.cfg")


def physical(ratio_sq: float, theta: float):
    """Ca-40 geometry with |dnu/lambda|^2 = ratio_sq at mixing angle theta."""
    return geometry_for_ratio(NU_A, math.sqrt(ratio_sq), K_729, RABI, CA40, theta=theta)


def random_block_state(basis: FockBasis, charges, rng) -> np.ndarray:
    psi = np.zeros(basis.dim, dtype=complex)
    for C in charges:
        sl = basis.block(C)
        n = sl.stop - sl.start
        psi[sl] = rng.normal(size=n) + 1j * rng.normal(size=n)
    return psi / np.linalg.norm(psi)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def unit_model():
    """Dimensionless model, lambda = 1."""
    return EffectiveModel(lam=1.0, dnu=0.3, theta=0.4)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def verdict(request):
    """Record one PASS/FAIL line for an acceptance criterion, then assert it."""

    def report(number: int, ok: bool, detail: str) -> None:
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
        print(line)
        ACCEPTANCE_LINES.append(line)
        assert ok, line

    return report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
