"""Coupled epidemic-opinion dynamics on networks.

Simulation, spectral analysis, equilibrium certification and response
planning for a discrete-time networked SIS process whose infection and
recovery rates are modulated by a polar opinion dynamic with stubborn
positive anchors.
"""
from .dynamics import (
    CoupledState,
    SimConfig,
    Trajectory,
    coupled_step,
    epidemic_step,
    opinion_step,
    simulate,
)
from .equilibria import (
    EndemicSolveError,
    EquilibriumRecord,
    LyapunovReport,
    consensus_condition,
    endemic_stability_check,
    lyapunov_certificate,
    residuals,
    solve_endemic,
)
from .intervention import (
    AllocationResult,
    FloorEstimate,
    InterventionModel,
    OpinionSaturationError,
    ResponsePlan,
    allocate_budget,
    controlled_step,
    critical_uniform_opinion,
    opinion_floor,
    respond,
)
from .network import (
    DirectedWeightedNetwork,
    generate_watts_strogatz,
    laplacian,
    strongly_connected,
    strongly_connected_matrix,
)
from .params import (
    ModelParams,
    ScaledRates,
    ValidationReport,
    effective_infection,
    effective_recovery,
    require_valid,
    scale_base_matrices,
    validate,
)
from .spectral import (
    HealthyVerdict,
    ReproductionExtremes,
    SpectralConvergenceError,
    SpectralResult,
    dense_spectral_radius,
    healthy_verdict,
    jacobian,
    reproduction_extremes,
    reproduction_number,
    spectral_radius,
)

__version__ = "0.1.0"

__all__ = [
    "CoupledState",
    "SimConfig",
    "Trajectory",
    "coupled_step",
    "epidemic_step",
    "opinion_step",
    "simulate",
    "EndemicSolveError",
    "EquilibriumRecord",
    "LyapunovReport",
    "consensus_condition",
    "endemic_stability_check",
    "lyapunov_certificate",
    "residuals",
    "solve_endemic",
    "AllocationResult",
    "FloorEstimate",
    "InterventionModel",
    "OpinionSaturationError",
    "ResponsePlan",
    "allocate_budget",
    "controlled_step",
    "critical_uniform_opinion",
    "opinion_floor",
    "respond",
    "DirectedWeightedNetwork",
    "generate_watts_strogatz",
    "laplacian",
    "strongly_connected",
    "strongly_connected_matrix",
    "ModelParams",
    "ScaledRates",
    "ValidationReport",
    "effective_infection",
    "effective_recovery",
    "require_valid",
    "scale_base_matrices",
    "validate",
    "HealthyVerdict",
    "ReproductionExtremes",
    "SpectralConvergenceError",
    "SpectralResult",
    "dense_spectral_radius",
    "healthy_verdict",
    "jacobian",
    "reproduction_extremes",
    "reproduction_number",
    "spectral_radius",
    "__version__",
]
