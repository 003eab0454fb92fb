"""Exception hierarchy shared across the solver."""


class DrawdivError(Exception):
    """Base class for all solver errors."""


class DomainError(DrawdivError):
    """An argument is outside the mathematical domain of the operation."""


class DegenerateDiffusion(DrawdivError):
    """sigma = 0: the diffusion layer does not apply, use the deterministic module."""


class RegimeError(DrawdivError):
    """The operation requires a rate-ceiling regime the parameters do not satisfy."""


class OverflowGuard(DrawdivError):
    """An exponential argument exceeded the clamp (+700); the result would overflow."""


class BracketError(DrawdivError):
    """A root could not be bracketed after the allowed bracket expansions."""


class NoSignChange(DrawdivError):
    """A scan that must contain exactly one sign change found none."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class MultipleSignChanges(DrawdivError):
    """A scan that must contain exactly one sign change found several."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class StepCollapse(DrawdivError):
    """Finite-difference refinement failed its internal consistency bound."""


class SingularCoefficient(DrawdivError):
    """A denominator coefficient of the curve ODE system crossed zero."""

    def __init__(self, message, c_trunc=None):
        super().__init__(message)
        self.c_trunc = c_trunc


class ConstraintDrift(DrawdivError):
    """The Newton re-projection onto the algebraic constraint diverged."""


class QueryBelowTruncation(DrawdivError):
    """A value-surface query lies below the truncated rate grid."""


class InadmissibleRate(DrawdivError):
    """A simulated strategy emitted a rate outside the admissible band."""
