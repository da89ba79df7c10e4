"""Exception types raised across the package."""


class GeometryError(ValueError):
    """Base class for invalid or degenerate geometric input."""


class InvalidRotationError(GeometryError):
    pass


class DegenerateDirectionError(GeometryError):
    pass


class PureRotationError(GeometryError):
    """Translation too small to define an essential matrix."""


class DegenerateLineError(GeometryError):
    """The image point maps onto the epipole, so the line is undefined."""


class DegenerateConfigurationError(GeometryError):
    """The null space of the normal matrix is not one-dimensional."""


class AmbiguousDecompositionError(GeometryError):
    """Two or more pose candidates tie in the cheirality vote."""


class NormalizationError(GeometryError):
    """Homogeneous point whose last coordinate is not 1."""


class UndefinedCorrelationError(ValueError):
    pass
