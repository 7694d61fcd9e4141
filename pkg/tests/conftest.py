import pytest

from euler_blowup.dynamics import default_t_end, integrate_layers
from euler_blowup.elliptic import Grid2D
from euler_blowup.fields import FieldStack
from euler_blowup.fixedpoint import (
    ScreeningMap,
    build_phi,
    iterate_to_fixed_point,
    make_background,
    sample_times,
)
from euler_blowup.scales import desk_preset


@pytest.fixture(scope="session")
def desk_small():
    """Two-layer desk preset for the fast fixed-point unit tests."""
    return desk_preset(n_max=2, rho_bar=64.0)


@pytest.fixture(scope="session")
def layers_small(desk_small):
    return integrate_layers(desk_small, steps_per_segment=128,
                            check_halving=False)


@pytest.fixture(scope="session")
def stack_small(desk_small, layers_small):
    return FieldStack(desk_small, layers_small)


@pytest.fixture(scope="session")
def grid_small():
    return Grid2D(4.0, 129)


@pytest.fixture(scope="session")
def phi_small():
    return build_phi(0.5, table_n=32769, measure_n=513)


@pytest.fixture(scope="session")
def times_small(desk_small, layers_small):
    return sample_times(layers_small, 4, default_t_end(desk_small))


@pytest.fixture(scope="session")
def background_small(stack_small, grid_small, times_small):
    return make_background(stack_small, grid_small, times_small)


@pytest.fixture(scope="session")
def map_small(grid_small, background_small, phi_small, desk_small):
    return ScreeningMap(grid_small, background_small, phi_small,
                        desk_small.rho_bar)


@pytest.fixture(scope="session")
def fixed_point_small(map_small):
    return iterate_to_fixed_point(map_small, tol=1e-9)
