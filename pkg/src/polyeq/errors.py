"""Exception hierarchy shared by all modules."""


class PolyeqError(Exception):
    """Base class for every error raised by this package."""


class GeometryError(PolyeqError):
    """Bad parameters, singular parametrizations or non-finite evaluations."""


class DegenerateError(PolyeqError):
    """A quantity required to be generic (e.g. rho*kappa + 1) vanishes."""


class NonConvexError(GeometryError):
    """Second fundamental form violates the convexity sign conditions."""


class DiscretizationError(PolyeqError):
    """Grid or hull construction failed."""


class ClassificationError(PolyeqError):
    """Equilibrium census requested on an invalid cell complex."""


class WindowError(PolyeqError):
    """A counting window touches the boundary of the discretized patch."""


class MeshFormatError(PolyeqError):
    """Malformed OBJ/PLY input."""
