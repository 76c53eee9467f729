"""Exception types shared across the package."""


class ConstraintInfeasibleError(ValueError):
    """Requested signal constraints cannot be satisfied jointly."""


class InvalidDimensionError(ValueError):
    """A dimension argument is out of range (e.g. zero measurement rows)."""


class DimensionMismatchError(ValueError):
    """Shapes of matrix/vector arguments are inconsistent."""


class InvalidParameterError(ValueError):
    """A numeric parameter violates its domain (e.g. non-positive resolution)."""


class DegenerateInputError(ValueError):
    """An input is degenerate for the requested operation (e.g. zero vector)."""


class ModelMismatchError(ValueError):
    """An operation was combined with an observation model it does not apply to."""


class UnboundedProblemError(ValueError):
    """The requested maximization is unbounded."""


class InfeasibleCenterError(ValueError):
    """A localization center does not belong to the constraint set."""


class FitImpossibleError(ValueError):
    """Not enough usable data points to fit a rate."""


class ConfigError(ValueError):
    """An experiment configuration failed schema validation."""
