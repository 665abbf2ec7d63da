"""Exception types shared across the package.

The CLI maps these onto exit codes: DomainError (and subclasses) -> 1,
identity-check failures -> 2, ConvergenceError -> 3.
"""


class DomainError(ValueError):
    """Input outside the mathematical domain of an operation."""


class PoleError(DomainError):
    """Evaluation requested too close to a pole; carries the pole's name."""

    def __init__(self, pole: str, message: str | None = None):
        self.pole = pole
        super().__init__(message or f"evaluation too close to pole {pole}")


class SizeGuardError(DomainError):
    """An exact-enumeration guard was exceeded."""


class TruncationError(DomainError):
    """A series operation cannot be performed in the truncated ring."""


class ConvergenceError(RuntimeError):
    """An iterative solver failed to reach its tolerance."""


class ContinuationError(ConvergenceError):
    """Homotopy continuation failed; carries the trace of accepted steps."""

    def __init__(self, message: str, trace=None):
        self.trace = trace or []
        super().__init__(message)


class ExtractionError(RuntimeError):
    """Finite-lattice free-energy extraction failed its residual check."""

    def __init__(self, message: str, first_failing_order: int | None = None):
        self.first_failing_order = first_failing_order
        super().__init__(message)
