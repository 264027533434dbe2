import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "helmdg", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("helmdg")


@pytest.fixture(scope="session")
def regular4():
    from helmdg import build_mesh
    return build_mesh("regular", 4)


@pytest.fixture(scope="session")
def regular8():
    from helmdg import build_mesh
    return build_mesh("regular", 8)


@pytest.fixture(scope="session")
def mesh_zoo():
    """One mesh of each kind, small enough for exhaustive checks."""
    from helmdg import build_mesh
    return {
        "regular": build_mesh("regular", 6),
        "chevron": build_mesh("chevron", 6),
        "perturbed": build_mesh("perturbed", 6, seed=11, delta=0.15,
                                perturbation_exponent=0.5),
    }


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)
