"""Exception types raised across the package."""


class KvhLabError(Exception):
    """Base class for all package errors."""


class SingularRegion(KvhLabError):
    """A Kepler evaluation or trajectory entered the excluded ball |q| < r_min."""

    def __init__(self, message, time=None, point=None):
        super().__init__(message)
        self.time = time
        self.point = point


class DomainTooSmall(KvhLabError):
    pass


class GridMismatch(KvhLabError):
    pass


class UnsupportedDimension(KvhLabError):
    pass


class WrongModelKind(KvhLabError):
    pass


class SupportEscapesDomain(KvhLabError):
    pass


class BoundaryNotDecayed(KvhLabError):
    """State is not small enough on the boundary band to be propagated."""


class CflViolation(KvhLabError):
    def __init__(self, dt, bound, max_speed):
        super().__init__(
            f"dt={dt:.6g} violates the CFL bound {bound:.6g} "
            f"(max|X_H| = {max_speed:.6g} over the grid)"
        )
        self.dt = dt
        self.bound = bound
        self.max_speed = max_speed


class NonFinite(KvhLabError):
    def __init__(self, step):
        super().__init__(f"non-finite values after step {step}")
        self.step = step


class InsufficientSamples(KvhLabError):
    pass


class TooManyAborts(KvhLabError):
    def __init__(self, aborted, total):
        super().__init__(f"{aborted} of {total} samples hit the singular region")
        self.aborted = aborted
        self.total = total


class ConfigError(KvhLabError):
    """Invalid run configuration; ``path`` locates the offending field."""

    def __init__(self, path, message):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path
