"""Exception types raised by the transform and control routines."""


class NumericalError(Exception):
    """Base class for failures of a numerical procedure (as opposed to bad input)."""


class UnobservableSystemError(NumericalError):
    """The (A, C) pair is not observable, so no observer gain exists."""


class PlacementError(NumericalError):
    """Observer pole placement failed after exhausting its retry budget."""


class OrderOverflowError(NumericalError):
    """Truncation tolerance unreachable within the order cap.

    Carries the relative norm achieved at the cap in ``achieved_norm``.
    """

    def __init__(self, message, achieved_norm):
        super().__init__(message)
        self.achieved_norm = achieved_norm


class DareConvergenceError(NumericalError):
    """Riccati iteration did not converge; ``residual`` holds the last residual."""

    def __init__(self, message, residual):
        super().__init__(message)
        self.residual = residual


class InsufficientHistoryError(ValueError):
    """An ARX operation was given fewer past samples than the model order."""
