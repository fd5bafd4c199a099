import pytest

from cascade_lab.cascade import CascadeParams, cascade_trajectory, search_cascade_orbit
from cascade_lab.lattice import build_lambda
from cascade_lab.toy import ToyParams


@pytest.fixture(scope="session")
def lam3():
    return build_lambda(3, 4, seed=0)


@pytest.fixture(scope="session")
def lam5():
    return build_lambda(5, 4, seed=3)


@pytest.fixture(scope="session")
def cascade5():
    params = CascadeParams(toy=ToyParams(n_modes=5, delta=1e-3))
    state, report = search_cascade_orbit(params)
    return params, state, report, cascade_trajectory(params, state.modes)
