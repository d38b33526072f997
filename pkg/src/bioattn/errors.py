"""Exception types shared across the package."""


class ShapeError(ValueError):
    """Operand shapes are incompatible or an extent is degenerate."""


class ConfigurationError(ValueError):
    """A module or experiment was configured with invalid settings."""


class DomainError(ValueError):
    """A numeric argument lies outside the mathematical domain of the operation."""


class TrainingDivergence(RuntimeError):
    """Training loss exploded past the divergence guard."""
