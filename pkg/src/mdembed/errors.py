"""Exception hierarchy shared by every module."""


class MdembedError(Exception):
    """Base class for all library errors."""


class NotSymbolic(MdembedError):
    pass


class ResourceLimit(MdembedError):
    pass


class InsufficientWindow(MdembedError):
    pass


class InvalidSystem(MdembedError):
    pass


class BadWindow(MdembedError):
    pass


class MixedSystems(MdembedError):
    pass


class AperiodicityRequired(MdembedError):
    pass


class InvariantViolation(MdembedError):
    """An exact certificate failed; this signals a bug, not bad input."""


class NotInBase(MdembedError):
    pass


class BadEpsilon(MdembedError):
    pass


class Unsupported(MdembedError):
    pass


class DimensionTooSmall(MdembedError):
    pass


class RetriesExhausted(MdembedError):
    def __init__(self, message, subset=None):
        super().__init__(message)
        self.subset = subset


class ModulusViolated(MdembedError):
    pass


class OrderTooLarge(MdembedError):
    pass


class VerificationFailed(MdembedError):
    pass


class WidimGateFailed(MdembedError):
    def __init__(self, message, k=None):
        super().__init__(message)
        self.k = k


class UnsupportedDimension(MdembedError):
    pass


class LengthMismatch(MdembedError):
    pass


class ConfigError(MdembedError):
    pass
