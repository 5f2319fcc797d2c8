"""Exception types raised across the package."""


class LackError(Exception):
    """Base class for all package errors."""


class DomainError(LackError, ValueError):
    """An argument lies outside the domain of a function."""


class TailUnderflowError(DomainError):
    """The survival probability at ``t`` is too small for a stable ratio."""

    def __init__(self, t, largest_valid_t):
        self.t = t
        self.largest_valid_t = largest_valid_t
        super().__init__(
            f"survival probability at t={t:g} s is below the underflow floor; "
            f"largest valid t is {largest_valid_t:.6g} s"
        )


class FitError(LackError):
    pass


class SequencingError(LackError):
    """Packets were handed to the scheduler out of timestamp order."""


class FramingError(LackError):
    pass


class ConfigError(LackError, ValueError):
    """Configuration rejected; carries every violation found."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))
