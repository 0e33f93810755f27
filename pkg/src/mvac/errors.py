"""Exception types raised across the package."""


class MvacError(Exception):
    """Base class for every error raised by mvac."""


class ShapeMismatch(MvacError, ValueError):
    pass


class SingularMatrix(MvacError):
    """A pointwise matrix is too close to singular for a nearest orthogonal matrix."""

    def __init__(self, i, j, sigma_min=None):
        self.i, self.j, self.sigma_min = int(i), int(j), sigma_min
        msg = f"singular matrix at grid point ({self.i}, {self.j})"
        if sigma_min is not None:
            msg += f", smallest singular value {sigma_min:.3e}"
        super().__init__(msg)


class DegenerateDeterminant(MvacError):
    def __init__(self, i, j, det=None):
        self.i, self.j, self.det = int(i), int(j), det
        super().__init__(f"determinant too small at grid point ({self.i}, {self.j}): {det!r}")


class AmbiguousWinding(MvacError):
    pass


class MaxItersExceeded(MvacError):
    """Raised when an iteration hits its cap; carries the last state and the record so far."""

    def __init__(self, state, trajectory=None, iters=None):
        self.state = state
        self.trajectory = trajectory
        self.iters = iters
        super().__init__(f"not converged after {iters} iterations")


class BlowUp(MvacError):
    pass


class OrthogonalityDrift(MvacError):
    pass


class EmptyInterface(MvacError):
    pass


class CorrespondenceFailure(MvacError):
    pass


class BadMagic(MvacError):
    pass


class VersionMismatch(MvacError):
    pass


class TruncatedPayload(MvacError):
    pass


class HeaderMismatch(MvacError):
    pass


class UnsupportedN(MvacError):
    pass


class UnknownGenerator(MvacError):
    pass


class BadParameter(MvacError, ValueError):
    pass


class ConfigError(MvacError):
    """Invalid run configuration; ``field`` names the offending key."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")
