"""mfglab: equilibria, incentives and deviation dynamics for a
linear-quadratic mean field model with terminal-mean interaction."""

from .costs import (
    AdjointDiagnostic,
    CostReport,
    OrderingReport,
    PStarResult,
    cost_report,
    ordering_diagnostics,
    p_star,
    poi_adjoint,
)
from .deviation import (
    ConvergenceCondition,
    IterationTrace,
    WeightSchedule,
    check_convergence_condition,
    identify_limit,
    run_fictitious_play,
    run_fixed_point,
    run_generic,
)
from .equilibria import (
    EnvironmentMean,
    Equilibrium,
    FeedbackControl,
    PPartialEquilibrium,
    best_response,
    evaluate_cost,
    solve_lambda_interpolated,
    solve_mfc,
    solve_mfg,
    solve_p_partial,
)
from .fbode import (
    FbodeSolution,
    FbodeSystem,
    riccati_closed_form,
    solve_closed_form,
    solve_numeric,
)
from .incentives import (
    LambdaCosts,
    ValueCoeffs,
    ValueMatchingIncentive,
    build_lambda_costs,
    mfc_value_coeffs,
    value_matching_incentive,
    verify_lambda1_equals_mfc,
    verify_value_matching,
)
from .model import (
    ModelDiagnostics,
    ModelParams,
    TimeGrid,
    default_grid,
    monotonicity_flag,
    validate,
)

__version__ = "0.1.0"

__all__ = [
    "AdjointDiagnostic", "ConvergenceCondition", "CostReport",
    "EnvironmentMean", "Equilibrium", "FbodeSolution", "FbodeSystem",
    "FeedbackControl", "IterationTrace", "LambdaCosts", "ModelDiagnostics",
    "ModelParams", "OrderingReport", "PPartialEquilibrium", "PStarResult",
    "TimeGrid", "ValueCoeffs", "ValueMatchingIncentive", "WeightSchedule",
    "best_response", "build_lambda_costs", "check_convergence_condition",
    "cost_report", "default_grid", "evaluate_cost", "identify_limit",
    "mfc_value_coeffs", "monotonicity_flag", "ordering_diagnostics", "p_star",
    "poi_adjoint", "riccati_closed_form", "run_fictitious_play",
    "run_fixed_point", "run_generic", "solve_closed_form",
    "solve_lambda_interpolated", "solve_mfc", "solve_mfg", "solve_numeric",
    "solve_p_partial", "validate", "value_matching_incentive",
    "verify_lambda1_equals_mfc", "verify_value_matching",
]
