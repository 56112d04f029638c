"""Structure-preserving explicit integrators for conditionally linear ODEs.

Library layout:

* :mod:`condlin.core` - conditionally linear systems and single-component flows
* :mod:`condlin.integrators` - one-step methods and the fixed-step driver
* :mod:`condlin.models` - Van der Pol and Hodgkin-Huxley systems
* :mod:`condlin.analysis` - limit-cycle radii, jump returns, spike statistics
* :mod:`condlin.experiments` / :mod:`condlin.cli` - reproduction runs and CSV output
"""

__version__ = "0.1.0"

from .core import (
    BACKWARD_EULER,
    EXACT,
    FORWARD_EULER,
    CondLinSystem,
    FlowKind,
    State,
    adjoint,
    check_conditional_linearity,
    component_flow,
    custom_flow,
    exprel,
    group_flow,
    phi1,
    stability,
)
from .integrators import (
    METHOD_NAMES,
    Method,
    Trajectory,
    integrate,
    make_method,
    reference_integrate,
    step,
)
from .models import (
    CurrentProtocol,
    HHParams,
    VdpParams,
    hh_rates,
    hh_rest_state,
    hh_system,
    integrate_reduced,
    reduced_hh_step,
    vdp_system,
)
