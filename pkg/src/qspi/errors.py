"""Exception types shared across the package."""


class QSPIError(Exception):
    """Base class for all package errors."""


class InvariantViolation(QSPIError):
    """A numerical invariant failed beyond its tolerance.

    ``name`` identifies the invariant and ``residual`` is the offending value,
    so callers (notably the CLI) can report exactly what broke.
    """

    def __init__(self, name, residual, tolerance=None):
        self.name = name
        self.residual = residual
        self.tolerance = tolerance
        msg = f"{name}: residual {residual:.3e}"
        if tolerance is not None:
            msg += f" exceeds tolerance {tolerance:.1e}"
        super().__init__(msg)


class QuadratureNotConverged(InvariantViolation):
    pass


class LeakageExceeded(InvariantViolation):
    pass


class NonFiniteObjective(QSPIError):
    pass


class DegenerateFit(QSPIError):
    pass


class PhaseFileError(QSPIError, ValueError):
    pass


class TruncationWarning(UserWarning):
    """Doubling the Fock truncation moved a probability by more than the target."""
