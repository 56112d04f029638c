import numpy as np
import pytest

from condlin.integrators import reference_integrate
from condlin.models import (
    CurrentProtocol,
    HHParams,
    VdpParams,
    hh_rest_state,
    hh_system,
    vdp_initial_state,
    vdp_system,
)


@pytest.fixture(scope="session")
def vdp_nonstiff():
    return vdp_system(VdpParams(0.05))


@pytest.fixture(scope="session")
def vdp_stiff():
    return vdp_system(VdpParams(50.0))


@pytest.fixture(scope="session")
def hh_default():
    return hh_system(HHParams(), CurrentProtocol(10.0))


@pytest.fixture(scope="session")
def stiff_ref_traj(vdp_stiff):
    # Strang splitting at h_ref = 1e-5 over 400 time units (~4.5 cycles
    # after the transient); shared because it costs a few seconds.
    return reference_integrate(vdp_stiff, vdp_initial_state(), 400.0)


@pytest.fixture(scope="session")
def hh_ref_traj(hh_default):
    return reference_integrate(hh_default, hh_rest_state(), 200.0)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)
