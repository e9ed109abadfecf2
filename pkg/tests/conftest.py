from __future__ import annotations

import sys

import numpy as np
import pytest
from hypothesis import strategies as st

from infotrade.environment import Environment


@pytest.fixture
def e1() -> Environment:
    return Environment.from_arrays([1, 2], [0.5, 0.5], [0, 0], "E1")


@pytest.fixture
def e2() -> Environment:
    return Environment.from_arrays([1, 2], [0.5, 0.5], [0.5, 1.0], "E2")


@pytest.fixture
def e3() -> Environment:
    return Environment.from_arrays([1, 2], [0.5, 0.5], [3, 0], "E3")


def random_env(rng: np.random.Generator, n_min: int = 2, n_max: int = 8, affine: bool = False) -> Environment:
    """Gains-from-trade environment with values in [0, 10] and costs below values."""
    n = int(rng.integers(n_min, n_max + 1))
    values = np.sort(rng.choice(np.arange(1, 1001), size=n, replace=False)) / 100.0
    probs = rng.dirichlet(np.ones(n))
    if affine:
        slope = rng.uniform(0.0, 0.9)
        intercept = rng.uniform(-0.5, 0.5) * values[0] * (1 - slope)
        costs = slope * values + intercept
    else:
        costs = values * rng.uniform(0.0, 1.0, size=n)
    return Environment.from_arrays(values, probs, costs)


@st.composite
def environments(draw: st.DrawFn, n_max: int = 6) -> Environment:
    n = draw(st.integers(2, n_max))
    raw = draw(st.lists(st.integers(1, 400), min_size=n, max_size=n, unique=True))
    values = np.sort(np.array(raw, dtype=float)) / 40.0
    weights = np.array(draw(st.lists(st.integers(1, 50), min_size=n, max_size=n)), dtype=float)
    shares = np.array(draw(st.lists(st.integers(0, 100), min_size=n, max_size=n)), dtype=float) / 100.0
    return Environment.from_arrays(values, weights / weights.sum(), values * shares)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    module = sys.modules.get("tests.test_acceptance")
    lines = module.summary_lines() if module is not None else []
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
