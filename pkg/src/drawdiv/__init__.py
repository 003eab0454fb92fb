"""Optimal dividend payout under a drawdown constraint for a drifted
Brownian surplus: closed forms, free-boundary curve solver, value surface,
numerical verification, and Monte Carlo oracles.
"""

from .boundaries import (
    Absent,
    AsymptoticPredictions,
    BoundaryValues,
    asymptotic_predictions,
    solve_boundaries,
    solve_xstar,
    solve_zstar,
    unconstrained_threshold,
    xstar_onset,
)
from .curves import CurvePair, solve_A, solve_curves
from .deterministic import (
    DetParams,
    det_indifference_x,
    det_optimal_b,
    det_refraction_value,
)
from .errors import (
    BracketError,
    ConstraintDrift,
    DegenerateDiffusion,
    DomainError,
    DrawdivError,
    InadmissibleRate,
    MultipleSignChanges,
    NoSignChange,
    OverflowGuard,
    QueryBelowTruncation,
    RegimeError,
    SingularCoefficient,
    StepCollapse,
)
from .model import (
    ModelParams,
    amplitude_at_ceiling,
    characteristic_roots,
    constant_rate_value,
    optimal_refraction_threshold,
    refraction_value,
    two_rate_value,
)
from .simulate import (
    ConstantRate,
    LumpSumNow,
    Refraction,
    SimulationResult,
    TwoCurve,
    jump_dividend,
    simulate,
)
from .surface import (
    PolicyAction,
    ValueSurface,
    build_surface,
    eval_partials,
    eval_value,
    export_grid,
    lookup_ell,
    policy_action,
)
from .verify import (
    GridSpec,
    VerificationReport,
    check_degenerate_ceiling,
    check_marginal_conditions,
    check_supersolution,
)

__version__ = "1.0.0"
