from pathlib import Path

import numpy as np
import pytest

from tensordecomp import DenseTensor

FIXTURES = Path(__file__).parent / "fixtures"

# Frontal slices of the 3 x 4 x 2 worked example.
X1 = np.array([[1, 4, 7, 10], [2, 5, 8, 11], [3, 6, 9, 12]], dtype=float)
X2 = np.array([[13, 16, 19, 22], [14, 17, 20, 23], [15, 18, 21, 24]], dtype=float)

# Printed matricizations. The last entry of the printed mode-3 unfolding
# reads 12; the column-index mapping forces 24.
X_MODE1 = np.hstack([X1, X2])
X_MODE2 = np.array([
    [1, 2, 3, 13, 14, 15],
    [4, 5, 6, 16, 17, 18],
    [7, 8, 9, 19, 20, 21],
    [10, 11, 12, 22, 23, 24],
], dtype=float)
X_MODE3 = np.array([np.arange(1, 13), np.arange(13, 25)], dtype=float)


@pytest.fixture
def example_tensor():
    return DenseTensor(np.stack([X1, X2], axis=2))


@pytest.fixture
def fixtures_dir():
    return FIXTURES


def rng_for(*tag):
    """Independent seeded stream per test and purpose."""
    return np.random.default_rng(list(tag))


def match_cosines(est, truth):
    """Greedy |cosine| matching; returns the matched |cosine| per truth column."""
    from tensordecomp.moments import match_columns

    perm = match_columns(est, truth)
    e = est[:, perm] / np.linalg.norm(est[:, perm], axis=0)
    t = truth / np.linalg.norm(truth, axis=0)
    return np.abs(np.sum(e * t, axis=0)), perm


# Acceptance results, filled by tests/test_acceptance.py and printed at the end
# of the run so every criterion gets exactly one line.
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[num])
