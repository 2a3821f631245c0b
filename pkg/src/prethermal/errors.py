class ConvergenceError(ArithmeticError):
    """A numerical procedure stopped before meeting its tolerance."""


class ConsistencyError(ArithmeticError):
    """An internal invariant (hermiticity, spectrum bounds, ...) was violated."""
