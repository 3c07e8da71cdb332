"""Exception types raised by the library.

Each error maps onto one CLI exit-code family through ``exit_code``:
2 for mesh problems, 3 for admissibility, 4 for numerics.
"""


class BsdError(Exception):
    exit_code = 1


class MeshError(BsdError, ValueError):
    exit_code = 2


class NonManifold(MeshError):
    pass


class OpenSurface(MeshError):
    pass


class DegeneratePanel(MeshError):
    pass


class EmptyQuadrature(MeshError):
    pass


class AdmissibilityError(BsdError, ValueError):
    exit_code = 3


class FluxViolation(AdmissibilityError):
    """Per-component vorticity flux does not vanish."""

    def __init__(self, message, fluxes=None, labels=None):
        super().__init__(message)
        self.fluxes = fluxes
        self.labels = labels


class CompatibilityViolation(AdmissibilityError):
    def __init__(self, message, defect=None):
        super().__init__(message)
        self.defect = defect


class NumericsError(BsdError, ArithmeticError):
    exit_code = 4


class IllConditioned(NumericsError):
    pass


class SizeMismatch(BsdError, ValueError):
    pass


class OutsideDomain(BsdError, ValueError):
    pass


class TooCloseToBoundary(BsdError, ValueError):
    pass


class CoincidentPoints(BsdError, ValueError):
    pass


class OnAxis(BsdError, ValueError):
    pass
