import numpy as np
import pytest

from nidsbalance.data import Column, Dataset, SyntheticSpec, generate_synthetic


def make_dataset(X, y, names=None) -> Dataset:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    names = names or [f"f{j}" for j in range(X.shape[1])]
    return Dataset(tuple(Column(n) for n in names), X, np.asarray(y))


XOR_X = np.array([[0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]])
XOR_Y = np.array([0, 0, 1, 1])


@pytest.fixture
def xor():
    return XOR_X.copy(), XOR_Y.copy()


@pytest.fixture(scope="session")
def blobs():
    """n=2,000 balanced blobs, means 4 sigma apart on each coordinate."""
    return generate_synthetic(SyntheticSpec(n_majority=1000, n_minority=1000, n_features=5,
                                            class_separation=4.0, seed=3))


# acceptance criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def record(n: int, ok: bool, detail: str = "") -> None:
    ACCEPTANCE[n] = (bool(ok), detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
