"""Exception types raised across the package."""


class StochLiouvilleError(Exception):
    """Base class for package errors."""


class InvalidStateError(StochLiouvilleError, ValueError):
    """A polarization vector or density matrix violates its invariants."""


class DimensionError(StochLiouvilleError, ValueError):
    pass


class DivergenceError(StochLiouvilleError, ArithmeticError):
    """A quantity is singular for the requested arguments."""


class NumericalAbort(StochLiouvilleError, FloatingPointError):
    """Integration produced a non-finite state.

    Attributes
    ----------
    step : int
        Step index at which the non-finite value appeared.
    state : tuple
        Last finite state before the abort (may be None).
    trajectory : int or None
        Trajectory index, filled in by the ensemble runner.
    """

    def __init__(self, message, step=None, state=None, trajectory=None):
        super().__init__(message)
        self.step = step
        self.state = state
        self.trajectory = trajectory


class FitError(StochLiouvilleError, RuntimeError):
    pass


class ConfigError(StochLiouvilleError, ValueError):
    pass
