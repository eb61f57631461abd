"""Exception hierarchy shared by every module."""


class SingcotError(Exception):
    pass


# geometry
class NoPath(SingcotError):
    pass


class OutOfOverlap(SingcotError):
    pass


class OutOfDomain(SingcotError):
    pass


class SingularJacobian(SingcotError):
    pass


# symplectic
class ChartMismatch(SingcotError):
    pass


class DimensionMismatch(SingcotError):
    pass


# normal forms
class ParseError(SingcotError):
    pass


class NotCritical(SingcotError):
    pass


class DegenerateSpectrum(SingcotError):
    pass


class UnknownLabel(SingcotError):
    pass


class SequenceInvalid(SingcotError):
    pass


# cotangent model
class NonSymplecticMap(SingcotError):
    pass


class MomentumMismatch(SingcotError):
    pass


class EllipticFactorUnsupported(SingcotError):
    pass


# sphere
class EpsilonOutOfRange(SingcotError):
    pass


# dynamics
class LeftAtlas(SingcotError):
    pass


class NoConvergence(SingcotError):
    pass


class SeedOffLevel(SingcotError):
    pass


class NotRegular(SingcotError):
    pass
