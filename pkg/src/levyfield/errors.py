"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the documented domain of a function."""


class UnsupportedMomentError(DomainError):
    """A moment of the requested order does not exist for the distribution."""


class InfeasibleOrderError(DomainError):
    """The requested L^p order is incompatible with the tail exponent eta."""


class PlanTooLargeError(RuntimeError):
    """The certified number of Fourier summands exceeds the configured cap."""

    def __init__(self, m_required: float, m_cap: int):
        super().__init__(
            f"inversion plan needs M = {m_required:.3e} summands, cap is {m_cap:.3e}"
        )
        self.m_required = m_required
        self.m_cap = m_cap


class NumericFailureError(RuntimeError):
    """A numeric routine failed to converge; carries diagnostics."""

    def __init__(self, message: str, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics


class InvalidSubordinatorError(ValueError):
    """A subordinator path contains a negative increment."""


class IncompatibleShapeError(ValueError):
    """Marginal shape parameters (lambda) disagree; no joint law exists."""


class IncompatibleScaleError(ValueError):
    """Marginal scale invariants delta*sqrt(alpha^2-beta^2) disagree."""


class InfeasibleDecorrelationError(ValueError):
    """The decorrelation matrix U is not positive definite."""


class DegenerateModeError(ValueError):
    """An eigenfunction with zero eigenvalue cannot be interpolated."""


class DegenerateCombinationError(ValueError):
    """All coefficients of a linear combination vanish."""
