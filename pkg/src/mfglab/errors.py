"""Exception hierarchy shared by all mfglab modules."""


class MfgLabError(Exception):
    """Base class for every error raised by this package."""


class NonFiniteError(MfgLabError):
    """A model parameter is NaN or infinite."""


class InvalidParameterError(MfgLabError):
    """A model parameter is outside its admissible domain (e.g. T <= 0)."""


class InvalidGridError(MfgLabError):
    """Time grid too coarse or inconsistent with the model horizon."""


class GridMismatchError(MfgLabError):
    """Two objects built on different time grids were combined."""


class SingularRiccatiError(MfgLabError):
    """The closed-form Riccati denominator vanishes inside the horizon."""


class SingularSystemError(MfgLabError):
    """The forward-backward system has no (unique) fixed point."""


class UnsupportedFormError(MfgLabError):
    """Closed-form solver asked for a system outside its validity class."""


class NoConvergenceError(MfgLabError):
    """An iterative solve exhausted its iteration budget."""


class OutOfRangeError(MfgLabError):
    """A proportion or interpolation weight lies outside [0, 1]."""


class InvalidScheduleError(MfgLabError):
    """A deviation weight schedule violates nonnegativity or normalization."""


class EmptyRangeError(MfgLabError):
    """A parameter sweep resolved to no evaluable points."""


class ConfigError(MfgLabError):
    """A scenario configuration is missing or has an invalid field."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")
