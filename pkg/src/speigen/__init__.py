"""Excited stationary states of the Schrödinger–Poisson system and the
scaling laws of their structure and rotation curves."""

from .errors import (
    BracketError,
    ContractError,
    DomainError,
    FeatureError,
    FitError,
    NodeCountError,
    SpEigenError,
)
from .features import (
    EigenFeatures,
    VelocityCurve,
    amplitude_fit_window,
    extract_features,
    find_extrema,
    find_nodes,
    velocity_curve,
)
from .fits import (
    FitResult,
    HeuristicReport,
    build_heuristic_report,
    fit_linear,
    fit_parabola,
    fit_power_law,
    fit_shifted_power,
)
from .potential import RadialGrid, RadialProfile, enclosed_integral, poisson_potential
from .solver import (
    EigenState,
    SolverConfig,
    inner_scf_step,
    scale_state,
    solve_stationary_state,
    validate_resolution,
)
from .universality import RescaledCurve, collapse_metric, rescale_nodal_pattern, rescale_velocity

__version__ = "0.1.0"
