import warnings

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from pcl.fock import CavityState, HilbertSpec, TruncationWarning

settings.register_profile(
    "pcl", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("pcl")


def random_density(dim: int, rng: np.random.Generator, support: int | None = None) -> np.ndarray:
    """Random full-rank density matrix, optionally confined to the first ``support`` levels."""
    k = dim if support is None else support
    g = rng.normal(size=(k, k)) + 1j * rng.normal(size=(k, k))
    rho = g @ g.conj().T
    out = np.zeros((dim, dim), dtype=complex)
    out[:k, :k] = rho / np.trace(rho)
    return out


def interior_state(space: HilbertSpec, rng: np.random.Generator, mode_count: int = 1) -> CavityState:
    """Random state with no weight on the top ``margin`` levels of any mode."""
    d, k = space.cutoff, space.interior
    if mode_count == 1:
        return CavityState(random_density(d, rng, k), space)
    mask = space.interior_mask(2)
    idx = np.nonzero(mask)[0]
    small = random_density(len(idx), rng)
    rho = np.zeros((d * d, d * d), dtype=complex)
    rho[np.ix_(idx, idx)] = small
    return CavityState(rho, space, 2)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(autouse=True)
def _quiet_truncation():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationWarning)
        yield


ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
