"""Exception hierarchy shared by all zmclab modules.

Every error carries a stable machine-readable ``code`` so the CLI can map
failures to distinct JSON error entries and exit statuses.
"""

from __future__ import annotations


class ZmcError(Exception):
    """Base class for all zmclab domain errors."""

    code = "error"


class ExpressionSyntaxError(ZmcError):
    """Malformed expression text; ``offset`` is the byte offset of the problem."""

    code = "syntax-error"

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


class UnboundParameterError(ZmcError):
    """Expression uses a parameter name with no binding."""

    code = "unbound-parameter"

    def __init__(self, name: str, offset: int):
        super().__init__(f"unbound parameter {name!r} (at offset {offset})")
        self.name = name
        self.offset = offset


class OutOfDomainError(ZmcError):
    """Field queried outside its domain rectangle; never extrapolated."""

    code = "out-of-domain"


class NonDifferentiablePointError(ZmcError):
    """A jet component is undefined or non-finite at the queried point."""

    code = "non-differentiable-point"


class LightLikePointError(ZmcError):
    """Operation requires |B| above the light-like tolerance."""

    code = "light-like-point"


class SonicPointError(ZmcError):
    """Chaplygin state or dual one-form undefined: |B| within sonic tolerance."""

    code = "sonic-point"


class DegenerateDenominatorError(ZmcError):
    """Dual one-form denominator not positive for the requested sign."""

    code = "degenerate-denominator"


class NonExactFormError(ZmcError):
    """Path-independence defect too large: integrand is not a closed form."""

    code = "non-exact-form"

    def __init__(self, message: str, defect: float):
        super().__init__(message)
        self.defect = defect


class InsufficientSamplesError(ZmcError):
    """Too few samples to fit light-like lines."""

    code = "insufficient-samples"


class ZeroDerivativeError(ZmcError):
    """g' vanishes where the dual potential integral needs 1/g'."""

    code = "zero-derivative"


class DomainViolationError(ZmcError):
    """Requested parameters leave the valid branch of a surface family."""

    code = "domain-violation"


class QuadratureError(ZmcError):
    """Adaptive quadrature failed to reach the requested tolerance."""

    code = "quadrature-failure"


class SolverError(ZmcError):
    """Base class for Dirichlet solver failures; carries a diagnostic report."""

    code = "solver-failure"

    def __init__(self, message: str, report: dict | None = None):
        super().__init__(message)
        self.report = report or {}


class MaxIterationsError(SolverError):
    code = "max-iterations"


class LinearSolveError(SolverError):
    code = "linear-solve-failure"


class CausalTypeViolationError(SolverError):
    """Iterate lost ellipticity: interior discrete B dropped to ~0."""

    code = "causal-type-violation"


class NonFiniteValueError(ZmcError):
    """Export refused: grid contains NaN or infinite values."""

    code = "non-finite-values"
