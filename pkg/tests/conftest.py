import numpy as np
import pytest

from weavesim.materials import StVkMaterial
from weavesim.rve import WeaveParams, gen_block_rve, gen_plain_weave_rve, gen_two_block_rve

# Table-2-flavored yarn material: E = 3497 MPa, nu = 0.2
YARN = StVkMaterial.from_young_poisson(3.497e9, 0.2)
# zero-Poisson variant for affine-exactness oracles
NU0 = StVkMaterial.from_young_poisson(1.0e9, 0.0)


@pytest.fixture(scope="session")
def yarn_material():
    return YARN


@pytest.fixture(scope="session")
def full_dirichlet_brick():
    """1x1 element in plane: every node sits on a side face, so the affine
    boundary data constrains the whole boundary."""
    return gen_block_rve(1e-3, 1e-3, 0.2e-3, 1, 1, 3, YARN, eps=0.0)


@pytest.fixture(scope="session")
def interior_brick_nu0():
    """Brick with free interior nodes and a zero-Poisson material, for which
    in-plane affine data makes the affine field the exact solution."""
    return gen_block_rve(1e-3, 1e-3, 0.25e-3, 3, 3, 2, NU0, eps=0.0)


@pytest.fixture(scope="session")
def two_block_mesh():
    return gen_two_block_rve(
        1e-3, 1e-3, 0.2e-3, 0.004e-3, 5, 5, 2, YARN
    )


@pytest.fixture(scope="session")
def small_weave():
    params = WeaveParams(
        yarns_per_direction=2,
        elems_axial=8,
        elems_width=2,
        elems_thickness=1,
    )
    return gen_plain_weave_rve(params, YARN)


@pytest.fixture()
def rng():
    return np.random.default_rng(42)
