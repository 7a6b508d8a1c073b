"""Exception hierarchy.

Every error carries an ``exit_code`` used by the command line front end:
2 for violated preconditions, 3 for numerical failures, 4 for I/O problems.
"""


class NSBesovError(Exception):
    exit_code = 1


class PreconditionError(NSBesovError, ValueError):
    exit_code = 2


class NumericalError(NSBesovError, ArithmeticError):
    exit_code = 3


class SnapshotError(NSBesovError, OSError):
    exit_code = 4


# preconditions
class InvalidDimension(PreconditionError):
    pass


class NonPowerOfTwo(PreconditionError):
    pass


class ShapeMismatch(PreconditionError):
    pass


class GridMismatch(PreconditionError):
    pass


class ExponentOutOfRange(PreconditionError):
    pass


class SectorViolation(PreconditionError):
    pass


class ConditionBViolation(PreconditionError):
    pass


class ThetaOutOfRange(PreconditionError):
    pass


class NegativeTime(PreconditionError):
    pass


class InsufficientSamples(PreconditionError):
    pass


class NonpositiveNorm(PreconditionError):
    pass


class WindowViolation(PreconditionError):
    pass


class TOutOfRange(PreconditionError):
    pass


class SymbolSingular(PreconditionError):
    pass


class ConfigError(PreconditionError):
    pass


# numerical failures
class NeumannDivergence(NumericalError):
    pass


class TailBoundViolation(NumericalError):
    pass


class QuadratureNotConverged(NumericalError):
    pass


class UnstableStep(NumericalError):
    pass


class NonContraction(NumericalError):
    pass


class PicardDivergence(NumericalError):
    pass


class ImaginaryResidue(NumericalError):
    pass


# snapshot I/O
class BadMagic(SnapshotError):
    pass


class VersionMismatch(SnapshotError):
    pass


class ShortRead(SnapshotError):
    pass
