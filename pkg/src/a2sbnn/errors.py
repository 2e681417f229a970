"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the operation's mathematical domain."""


class ShapeError(ValueError):
    """Array or tensor shapes are incompatible."""


class DegenerateInputError(ValueError):
    """Input carries no information (constant vector, single-sample batch)."""


class NumericError(ArithmeticError):
    """A numerical procedure failed (non-PD matrix, non-finite loss)."""


class GraphError(RuntimeError):
    """Autodiff graph misuse, e.g. asking for a gradient w.r.t. an unrelated tensor."""


class ConfigError(ValueError):
    """Invalid experiment configuration."""
