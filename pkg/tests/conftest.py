import os
from pathlib import Path

import numpy as np
import pytest

from cfwgan.data import InteractionMatrix, split_dataset

ROOT = Path(__file__).resolve().parents[1]


def ml100k_path() -> Path | None:
    path = Path(os.environ.get("CFWGAN_ML100K", ROOT / "data" / "ml-100k" / "u.data"))
    return path if path.is_file() else None


@pytest.fixture(scope="session")
def ml100k():
    path = ml100k_path()
    if path is None:
        pytest.skip("MovieLens-100K not found (set CFWGAN_ML100K or place it under data/ml-100k/u.data)")
    return path


def random_interactions(m=30, n=25, density=0.3, seed=0) -> InteractionMatrix:
    rng = np.random.default_rng(seed)
    x = rng.random((m, n)) < density
    # every user needs a few interactions to survive the split
    for u in range(m):
        x[u, rng.choice(n, 3, replace=False)] = True
    users, items = np.nonzero(x)
    return InteractionMatrix.from_pairs(m, n, users, items)


@pytest.fixture
def tiny_split():
    return split_dataset(random_interactions(), 0.2, 0.2, seed=3)


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
