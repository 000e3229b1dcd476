"""Exception types raised across the package."""


class RiskPGError(Exception):
    """Base class for all package errors."""


class TruncatedEpisode(RiskPGError):
    """An SSP episode hit ``max_steps`` before reaching the absorbing state."""

    def __init__(self, message, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory


class TruncatedEpisodePresent(RiskPGError):
    """A batch handed to an episodic estimator contains a truncated episode."""


class SingularSystem(RiskPGError):
    """A dense linear solve failed or produced non-finite values."""


class ReducibleChain(RiskPGError):
    """The policy-induced chain has no unique stationary distribution."""


class MassNotCaptured(RiskPGError):
    """Path enumeration left too much probability mass unabsorbed."""


class EmptySample(RiskPGError, ValueError):
    pass


class InvalidDistribution(RiskPGError, ValueError):
    pass


class DimensionMismatch(RiskPGError, ValueError):
    pass


class ZeroDelta(RiskPGError, ValueError):
    pass


class EmptyTail(RiskPGError):
    """No sample fell at or above the VaR estimate."""


class NonFiniteEstimate(RiskPGError, ValueError):
    pass


class ScheduleInvalid(RiskPGError, ValueError):
    """Step-size schedules fail the conditions an algorithm needs."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class ConfigError(RiskPGError, ValueError):
    pass
