"""Exception types shared by the solver modules and the CLI."""


class SizingError(ValueError):
    """Invalid spline-space dimensions (order or cell count)."""


class SolverBreakdown(ArithmeticError):
    """A Galerkin matrix failed to factor as symmetric positive definite.

    During a simulation this almost always means the depth has lost
    positivity somewhere in the domain.
    """


class BlowUpError(ArithmeticError):
    """The time stepper produced non-finite or runaway coefficients."""

    def __init__(self, message, t=None, step=None, max_coef=None):
        super().__init__(message)
        self.t = t
        self.step = step
        self.max_coef = max_coef


class ConfigError(ValueError):
    """Invalid experiment configuration."""


class CollisionAnalysisError(ValueError):
    """A peak trace lacks the structure of an overtaking collision."""
