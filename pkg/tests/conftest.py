from fractions import Fraction

import numpy as np
import pytest

from filtlab.model import MarkovModel


def frac_vector(rng, n, zero_prob=0.0, scale=6):
    while True:
        w = rng.integers(1, scale, n)
        if zero_prob:
            w = w * (rng.random(n) >= zero_prob)
        if w.sum() > 0:
            break
    total = int(w.sum())
    return np.array([Fraction(int(x), total) for x in w], dtype=object)


def frac_semimetric(rng, n, dim=2, scale=10):
    """L1 distances between random lattice points: always a semimetric."""
    pts = rng.integers(0, scale, (n, dim))
    d = np.abs(pts[:, None, :] - pts[None, :, :]).sum(-1)
    return np.array([[Fraction(int(x)) for x in row] for row in d], dtype=object)


def random_model(rng, max_states=4, max_levels=6, zero_prob=0.0):
    levels = int(rng.integers(1, max_levels + 1))
    counts = [int(rng.integers(1, max_states + 1)) for _ in range(levels + 1)]
    kernels = [np.array([frac_vector(rng, counts[i + 1], zero_prob) for _ in range(counts[i])],
                        dtype=object) for i in range(levels)]
    return MarkovModel("explicit", frac_vector(rng, counts[0], zero_prob), kernels=kernels)


@pytest.fixture
def rng():
    return np.random.default_rng(20261019)


ACCEPTANCE_LINES: list[str] = []


def record(criterion: int, ok: bool, detail: str) -> None:
    line = f"criterion {criterion:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
