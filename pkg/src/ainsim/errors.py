"""Exception hierarchy shared by all simulator modules."""


class SimulationError(Exception):
    """Base class for every error raised by ainsim."""


class ParameterError(SimulationError, ValueError):
    """An argument is outside its documented domain."""


class ConfigurationError(ParameterError):
    """A derived configuration is unusable (e.g. empty constellation)."""


class DegenerateInputError(SimulationError, ValueError):
    """Input hits a measure-zero case the scheme cannot handle."""


class SingularChannelError(DegenerateInputError):
    """A channel matrix that must be inverted is singular."""


class ConditioningError(SimulationError, ArithmeticError):
    """A zero-forcing matrix is too ill-conditioned to invert reliably."""

    def __init__(self, message: str, condition_number: float):
        super().__init__(message)
        self.condition_number = condition_number


class CapacityError(SimulationError):
    """An exhaustive search would exceed its enumeration cap."""
