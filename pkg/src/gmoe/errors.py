"""Exception hierarchy shared by all modules."""


class GmoeError(Exception):
    """Base class for every error raised by the package."""


class InvalidDimensionError(GmoeError, ValueError):
    pass


class DomainError(GmoeError, ValueError):
    pass


class NotPositiveError(GmoeError, ValueError):
    pass


class ShapeError(GmoeError, ValueError):
    pass


class GridError(GmoeError):
    pass


class SpecError(GmoeError, ValueError):
    pass


class UnphysicalStateError(GmoeError, ValueError):
    pass


class ConstraintError(GmoeError, ValueError):
    pass


class CutoffTooSmallError(GmoeError):
    """Truncated Fock space cannot hold the state to the required tolerance."""


class ResourceError(GmoeError):
    pass


class StepError(GmoeError):
    """Fixed-step integrator became inaccurate or unstable."""
