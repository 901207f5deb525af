"""Exception hierarchy shared by all limsup_lab modules."""


class LimsupLabError(Exception):
    """Base class for all errors raised by this package."""


class PreconditionError(LimsupLabError):
    """An operation was called outside its contract (PRE_VIOLATION)."""


class InsufficientFamilyError(LimsupLabError):
    """A greedy cover pass exhausted its candidates before reaching the
    required volume fraction.  At the working resolution the ball family
    does not witness a full-measure limsup inside the given cube."""


class DegenerateError(LimsupLabError):
    """The input has no interior to work with (zero volume, too few scales)."""


class UnsupportedError(LimsupLabError):
    """A parameter combination is outside the supported range."""


class RasterEmptyError(LimsupLabError):
    """Rasterization produced no grid cell fully inside the open shape."""


class DepthTooShallowError(LimsupLabError):
    """A verification needs more construction levels than were built."""


class UnresolvedScaleError(LimsupLabError):
    """A query radius lies below the finest scale the tree resolves."""
