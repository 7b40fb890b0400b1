"""Physical grid model: power flow, state estimation and operator actions."""
from .estimation import (
    FLOW,
    INJECTION,
    BddResult,
    BddUndefined,
    JacobianH,
    Measurement,
    MeasurementError,
    MeasurementSet,
    StateEstimate,
    UnobservableError,
    bad_data_detection,
    build_dc_jacobian,
    full_measurement_set,
    wls_state_estimation,
)
from .grid import Branch, Bus, GridError, GridNetwork, Injection, OperationalLimits, grid_from_dict, grid_to_dict
from .operation import (
    DispatchInfeasible,
    GridStateClass,
    PreconditionError,
    Violation,
    check_operational_limits,
    classify_grid_state,
    economic_dispatch,
)
from .powerflow import PowerFlowError, PowerFlowResult, run_power_flow
from .topology import ReconfigurationError, optimize_tap_position, reconfigure_topology, solve_with_fallback

__all__ = [name for name in dir() if not name.startswith("_")]
