import numpy as np
import pytest

from nvtomo import phantom
from nvtomo.physics import G_PER_NM

ACCEPTANCE_LINES = []

OPERATING_GRADIENT = 3.0 * G_PER_NM  # T/m
OPERATING_DELTA_F = 1280.0  # Hz


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def bcd_hydrogens():
    return phantom.extract_hydrogens(phantom.beta_cyclodextrin())


@pytest.fixture(scope="session")
def bcd_placed(bcd_hydrogens):
    return phantom.center_and_place(bcd_hydrogens, 5.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_molecule(rng, n=None, scale=1.0, z_offset=0.5):
    n = int(rng.integers(1, 21)) if n is None else n
    pos = rng.uniform(-scale, scale, size=(n, 3))
    pos[:, 2] += scale + z_offset
    return phantom.Molecule.from_arrays("H", pos)
