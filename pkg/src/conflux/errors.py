"""Exception hierarchy shared by all modules."""


class ConfluxError(Exception):
    """Base class; the CLI maps subclasses to exit codes."""


class ValidationError(ConfluxError, ValueError):
    """Malformed input: bad shapes, mismatched steps, schema violations."""


class PoleError(ConfluxError, ArithmeticError):
    """Evaluation requested at (or numerically on) a pole."""


class ResonanceError(ConfluxError, ArithmeticError):
    """Two eigenvalues of the constant term differ by a nonzero integer."""


class SingularMatrixError(ConfluxError, ArithmeticError):
    """A matrix that must be inverted is singular to working tolerance."""


class IllConditionedError(ConfluxError, ArithmeticError):
    """A numerical Jordan reduction is too ill-conditioned to trust."""


class HalfPlaneError(ConfluxError, ArithmeticError):
    """A certified series was evaluated outside its convergence half-plane."""


class ContinuationError(ConfluxError, ArithmeticError):
    """Meromorphic continuation could not follow the requested path."""


class HypothesisError(ConfluxError, ValueError):
    """Pole configuration violates the strip hypothesis (distinct, non-real
    imaginary parts)."""


class ConvergenceError(ConfluxError, ArithmeticError):
    """An iterative limit (h -> 0, step refinement) failed to settle."""
