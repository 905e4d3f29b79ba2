"""Exception types shared across the package."""


class InvalidArgument(ValueError):
    """A caller passed a value outside an operation's domain."""


class CapacityError(RuntimeError):
    """The requested system is too large for dense/exact treatment."""


class IntegrationFailure(RuntimeError):
    """The integrator could not produce a trustworthy trajectory.

    ``tau`` holds the scaled time reached when the failure was detected.
    """

    def __init__(self, message, tau=None):
        super().__init__(message)
        self.tau = tau


class UnsupportedClosure(ValueError):
    """A moment of a shape the second-order closure does not cover."""


class NotConverged(RuntimeError):
    """Steady-state detection failed; the horizon is too short."""


class NotReached(RuntimeError):
    """A threshold crossing never happened on the trajectory."""
