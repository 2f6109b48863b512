import numpy as np
import pytest

from kvh_lab.hamiltonians import HamiltonianModel
from kvh_lab.phase_space import PhaseGrid
from kvh_lab.wavefunction import InitialStateSpec, make_initial


@pytest.fixture
def grid1():
    return PhaseGrid(1, -8.0, 8.0, 128)


@pytest.fixture
def gauss1(grid1):
    """Unit-width complex Gaussian off the origin, n = 1."""
    spec = InitialStateSpec((0.5, -0.3), 1.0, (0.4, 0.7))
    return make_initial(spec, grid1)


@pytest.fixture
def real_gauss1(grid1):
    return make_initial(InitialStateSpec((0.0, 0.0), 1.0), grid1)


@pytest.fixture(scope="session")
def grid2():
    return PhaseGrid(2, -6.0, 6.0, 24)


@pytest.fixture(scope="session")
def gauss2(grid2):
    spec = InitialStateSpec((0.7, -0.4, 0.3, 0.5), 0.6, (0.3, -0.2, 0.5, 0.1))
    return make_initial(spec, grid2)


@pytest.fixture(scope="session")
def grid3():
    return PhaseGrid(3, -4.5, 4.5, 12)


@pytest.fixture(scope="session")
def gauss3(grid3):
    spec = InitialStateSpec((0.3, -0.2, 0.1, 0.2, 0.1, -0.3), 0.7, (0.2, 0.1, -0.1, 0.3, 0.0, 0.2))
    return make_initial(spec, grid3)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


MODELS = {
    "harmonic": lambda n: HamiltonianModel.harmonic(n, k=1.3),
    "anharmonic": lambda n: HamiltonianModel.anharmonic(n, a=1.0, b=0.2),
    "kepler": lambda n: HamiltonianModel.kepler(n, mu=1.2, lam=0.8),
    "free": lambda n: HamiltonianModel.free(n, m=1.5),
    "quadratic": lambda n: HamiltonianModel.quadratic((0.5, 1.0, 2.0)[:n], (1.5, 0.7, 0.3)[:n]),
}
