"""Exception and warning types raised across the package."""


class LesionSegError(Exception):
    """Base class for errors caused by bad input data."""


class InvalidK(LesionSegError, ValueError):
    pass


class EmptyCorpus(LesionSegError):
    pass


class EmptyMask(LesionSegError):
    pass


class NoSamples(LesionSegError):
    pass


class DimensionMismatch(LesionSegError, ValueError):
    pass


class VersionMismatch(LesionSegError):
    pass


class CorruptFile(LesionSegError):
    pass


class ZeroChannelWarning(UserWarning):
    """A color channel sums to zero, so gray-world balancing is undefined."""


class NoRegionsWarning(UserWarning):
    """No candidate region survived at any cluster count."""
