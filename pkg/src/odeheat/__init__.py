"""Penalized HUM null controls for a 1D heat equation coupled to an ODE."""

__version__ = "0.1.0"

from .grid import (
    ControlRegion,
    Coupling,
    HState,
    SpaceTimeGrid,
    control_l2_norm,
    h_norm,
    inner_product,
)
from .solvers import ProblemData, SolverConfig, Trajectory, solve_adjoint, solve_forward, uncontrolled_final
from .hum import (
    HumConfig,
    HumResult,
    duality_residual,
    evaluate_F,
    evaluate_J,
    gramian_apply,
    hum_cg,
    observability_ratio,
)
from .extension import (
    BoundaryControl,
    ExtensionConfig,
    extend_initial,
    extract_trace_control,
    verify_boundary_control,
)
