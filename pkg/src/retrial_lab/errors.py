"""Exception types shared across the package."""


class RetrialLabError(Exception):
    """Base class for all package errors."""


class ConfigError(RetrialLabError, ValueError):
    """Malformed or inadmissible configuration."""


class HypothesisViolation(RetrialLabError, ValueError):
    """A stability condition is used outside its hypotheses (e.g. lattice retrials)."""


class NumericalFailure(RetrialLabError, ArithmeticError):
    """Quadrature or root finding did not reach the requested accuracy."""

    def __init__(self, message, error_bound=float("nan")):
        super().__init__(f"{message} (achieved error bound {error_bound:.3g})")
        self.error_bound = error_bound


class DivergenceError(RetrialLabError, RuntimeError):
    """The orbit counter passed its guard; carries the step where it happened."""

    def __init__(self, step, bound, partial=None):
        super().__init__(f"orbit size exceeded {bound} at step {step}")
        self.step = step
        self.bound = bound
        self.partial = partial


class BadBracket(RetrialLabError, ValueError):
    """Sweep bracket endpoints did not classify to opposite verdicts."""
