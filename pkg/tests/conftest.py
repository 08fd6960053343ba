import numpy as np
import pytest

from ipsketch.sparse_vector import SparseVector

# Worked example: 1-based positions kept as indices in a universe of 17.
EXAMPLE_A = {3: 2.5, 6: 2.3, 8: 4.0, 11: 0.5, 13: 3.0, 16: -3.7}
EXAMPLE_B = {3: -3.1, 7: 0.4, 8: -4.2, 10: 1.5, 11: 1.0, 13: -2.6, 14: -5.9}
EXAMPLE_HASHES = {3: 0.11, 6: 0.39, 7: 0.92, 8: 0.14, 10: 0.42, 11: 0.8, 13: 0.43, 14: 0.07, 16: 0.23}


def random_vector(rng: np.random.Generator, n: int, nnz: int, outliers: int = 0) -> SparseVector:
    idx = np.sort(rng.choice(n, nnz, replace=False))
    vals = rng.uniform(-1, 1, nnz)
    vals[vals == 0] = 0.5
    if outliers:
        vals[rng.choice(nnz, outliers, replace=False)] = rng.uniform(1, 10, outliers)
    return SparseVector(n, idx.astype(np.uint64), vals)


def random_pair(rng: np.random.Generator, n: int, nnz: int, overlap: int, outliers: int = 0):
    pos = rng.choice(n, 2 * nnz - overlap, replace=False)
    ia = np.sort(pos[:nnz])
    ib = np.sort(np.concatenate([pos[:overlap], pos[nnz:]]))

    def vals():
        v = rng.uniform(-1, 1, nnz)
        v[v == 0] = 0.5
        if outliers:
            v[rng.choice(nnz, outliers, replace=False)] = rng.uniform(1, 10, outliers)
        return v

    return SparseVector(n, ia.astype(np.uint64), vals()), SparseVector(n, ib.astype(np.uint64), vals())


@pytest.fixture
def example_pair():
    return SparseVector.from_dict(17, EXAMPLE_A), SparseVector.from_dict(17, EXAMPLE_B)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: dict[int, str] = {}


def record_criterion(number: int, passed: bool, detail: str) -> None:
    line = f"criterion {number}: {'PASS' if passed else 'FAIL'} - {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
