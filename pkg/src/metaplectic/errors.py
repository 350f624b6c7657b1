"""Exception types raised across the package."""


class MetaplecticError(Exception):
    """Base class for all package errors."""


class InvalidArg(MetaplecticError, ValueError):
    pass


class NotSymplectic(MetaplecticError):
    def __init__(self, residual: float, tol: float):
        super().__init__(f"matrix is not symplectic: residual {residual:.3e} > {tol:.1e}")
        self.residual = residual
        self.tol = tol


class IsomorphismFailure(MetaplecticError):
    pass


class DegenerateVolume(MetaplecticError):
    pass


class NonAxisAligned(MetaplecticError):
    pass


class ZeroSignal(MetaplecticError):
    pass


class ZeroWindow(MetaplecticError):
    pass


class InsufficientData(MetaplecticError):
    pass


class SpecMismatch(MetaplecticError):
    pass


class SingularMatrix(MetaplecticError):
    pass


class SingularBlockA(MetaplecticError):
    pass


class FactorizationFailure(MetaplecticError):
    pass


class QuadratureOverflow(MetaplecticError):
    pass


class ResolutionViolation(MetaplecticError):
    pass


class RangeEmpty(MetaplecticError):
    pass


class NonZeroA(MetaplecticError):
    pass


class SingularB(MetaplecticError):
    pass


class StepTooLarge(MetaplecticError):
    pass
