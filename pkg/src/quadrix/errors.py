"""Exception hierarchy shared across the engine."""


class QuadrixError(Exception):
    """Base class for all engine errors."""


class ParseError(QuadrixError):
    """Syntax or semantic error while parsing an expression source string."""

    def __init__(self, message: str, position: int | None = None):
        self.position = position
        if position is not None:
            message = f"{message} (at position {position})"
        super().__init__(message)


class EvaluationError(QuadrixError):
    """Domain error or overflow while evaluating a function."""


class BranchError(QuadrixError):
    """No admissible z > 0 solving the level equation at the requested x."""


class ConvexityError(QuadrixError):
    """Pointwise convexity certificate failed (indefinite second fundamental form)."""


class TangencyError(QuadrixError):
    """Parallel-tangent solve diverged, left the branch, or h is outside the admissible interval."""


class RegionError(QuadrixError):
    """Integration region escapes the chart (fold reached) or a boundary solve failed."""


class ConfigError(QuadrixError):
    """Malformed run configuration."""
