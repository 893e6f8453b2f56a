import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from stochbidomain.geometry import ConductivityField, Domain, build_basis
from stochbidomain.galerkin import Geometry
from stochbidomain.membrane import MembraneModel

settings.register_profile("ci", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.function_scoped_fixture])
settings.load_profile("ci")


@pytest.fixture(scope="session")
def dn_domain():
    return Domain((1.0,), frozenset({"x0"}))


@pytest.fixture(scope="session")
def cond1d():
    return ConductivityField(1, 1.0, 0.5, 2.0, 1.0)


@pytest.fixture(scope="session")
def geo8(dn_domain, cond1d):
    return Geometry.build(dn_domain, 8, cond1d)


@pytest.fixture(scope="session")
def geo2d():
    dom = Domain((1.0, 0.5), frozenset({"x0", "y1"}))
    cond = ConductivityField(2, 1.2, 0.3, 0.9, 0.6, fiber_angle=0.4)
    return Geometry.build(dom, 10, cond)


@pytest.fixture(scope="session")
def fhn():
    return MembraneModel()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
