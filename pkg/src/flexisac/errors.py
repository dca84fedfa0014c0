"""Exception types raised across the package."""


class InvalidArgumentError(ValueError):
    """An argument is outside the domain an operation accepts."""


class DegenerateGeometryError(ValueError):
    """A UE or target coincides with an antenna position."""


class DegenerateCombinerError(ArithmeticError):
    """The sensing SINR denominator vanishes for the given combiner."""


class NoReceiveAntennasError(ValueError):
    """The receive assignment has empty support."""


class InvalidProblemError(ValueError):
    """A QCQP violates the convexity or shape requirements."""


class InfeasibleSubproblemError(RuntimeError):
    """A convex subproblem of the alternating optimization has no feasible point."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}
