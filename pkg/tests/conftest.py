import numpy as np
import pytest

from squeezebeam import DetectorSpec, EvolutionConfig, Grid, PhysicalParams, build_model


@pytest.fixture
def default_params():
    return PhysicalParams()


@pytest.fixture
def default_grid():
    return Grid()


@pytest.fixture
def small_grid():
    # same domain as the default, cheap enough for unit tests
    return Grid(n_x=512)


@pytest.fixture
def detector():
    return DetectorSpec()


@pytest.fixture
def small_model(default_params, small_grid, detector):
    return build_model(default_params, small_grid, detector)


@pytest.fixture
def fast_evolution():
    return EvolutionConfig(dt=4e-7, t_final=4e-4)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
