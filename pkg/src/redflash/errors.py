"""Exception types shared by the solvers."""


class FlashError(ArithmeticError):
    pass


class DomainError(FlashError, ValueError):
    """Argument outside the domain of a thermodynamic function (e.g. v <= b)."""


class NoRootError(FlashError):
    """No physical volume root exists for the requested state."""


class SinglePhaseSignal(FlashError):
    """K-factors admit no two-phase Rachford-Rice root."""


class DegenerateError(FlashError):
    """All K-factors equal one, or a derivative denominator vanished."""


class ConvergenceError(FlashError):
    """Iteration cap reached."""


class SingularJacobianError(FlashError):
    pass


class InfeasibleSplitError(FlashError):
    """Volume constraint cannot be met by the current phase split."""


class InstabilityError(FlashError):
    """Mechanically unstable state (dp/dv >= 0) where stability is required."""


class OutOfRangeError(FlashError, ValueError):
    """Temperature outside the range of the ideal-gas polynomial."""
