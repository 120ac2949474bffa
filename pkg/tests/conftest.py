import numpy as np
import pytest

from spinorwave.evolution import build_initial_state
from spinorwave.scenarios import get_scenario


@pytest.fixture
def rng():
    return np.random.default_rng(20250819)


def build_scenario(name, resolution=None, order=4, **params):
    system, data, extras = get_scenario(name).build(resolution, order=order,
                                                    **params)
    return system, data, extras


def scenario_state(name, resolution=None, order=4, **params):
    # admissibility at coarse resolutions is tested separately; skip the
    # strict gate so helpers can build arbitrarily small grids
    system, data, extras = build_scenario(name, resolution, order, **params)
    state = build_initial_state(system, data, f_init=extras["f_init"],
                                check="off")
    return system, state, extras


@pytest.fixture(scope="session")
def pp_wave_64():
    return build_scenario("pp_wave", 64)


@pytest.fixture(scope="session")
def warped_64():
    return build_scenario("warped", 64)
