"""saaconic: sample-average approximation of stochastic programs with
almost-sure conic constraints.

Solves the empirical problems by smooth penalty continuation with exact
proxes, recovers per-scenario multipliers from the penalty gradient,
reports KKT residuals, and ships experiment drivers for consistency
sweeps, minimax error-measure estimates, and covering-number-based
feasibility certification, instantiated on three built-in problems
(Sobolev-ball regression, dual optimal transport on finite spaces, and
semilinear diffusion control with a state ceiling).
"""

from .cones import Cone, cone_from_spec
from .errors import InputContractError, NumericalDomainError
from .kkt import (
    KktReport,
    aggregate_multiplier_norm,
    complementarity,
    kkt_report,
    stationarity_residual,
)
from .lab import (
    FeasibilityCertificate,
    PhiEstimate,
    SweepRecord,
    certify_epsilon_feasibility,
    estimate_error_measure,
    gradient_variance_estimates,
    greedy_covering_number,
    path_stage_records,
    run_consistency_sweep,
    sample_size_for_feasibility,
)
from .penalty import (
    PathResult,
    PenaltyPathConfig,
    assemble_penalized,
    gamma_schedule,
    recover_multipliers,
    solve_penalty_path,
)
from .program import (
    OracleSolution,
    Regularizer,
    ScenarioSet,
    StochasticProgram,
    ValidationEstimate,
    derive_seed,
    draw_scenarios,
    estimate_lipschitz,
    saa_constraint_residual,
    saa_objective,
    validation_estimate,
)
from .prox import SolveResult, check_gradient, solve_composite

__version__ = "0.1.0"

__all__ = [
    "Cone",
    "cone_from_spec",
    "InputContractError",
    "NumericalDomainError",
    "KktReport",
    "aggregate_multiplier_norm",
    "complementarity",
    "kkt_report",
    "stationarity_residual",
    "FeasibilityCertificate",
    "PhiEstimate",
    "SweepRecord",
    "certify_epsilon_feasibility",
    "estimate_error_measure",
    "gradient_variance_estimates",
    "greedy_covering_number",
    "path_stage_records",
    "run_consistency_sweep",
    "sample_size_for_feasibility",
    "PathResult",
    "PenaltyPathConfig",
    "assemble_penalized",
    "gamma_schedule",
    "recover_multipliers",
    "solve_penalty_path",
    "OracleSolution",
    "Regularizer",
    "ScenarioSet",
    "StochasticProgram",
    "ValidationEstimate",
    "derive_seed",
    "draw_scenarios",
    "estimate_lipschitz",
    "saa_constraint_residual",
    "saa_objective",
    "validation_estimate",
    "SolveResult",
    "check_gradient",
    "solve_composite",
    "__version__",
]
