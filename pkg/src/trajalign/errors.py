"""Exception hierarchy.

Every error carries the CLI exit code it maps to: 4 for data/shape
problems, 5 for numeric failures, 3 for I/O.
"""


class TrajAlignError(ValueError):
    exit_code = 4


# shape / data problems
class LengthMismatch(TrajAlignError):
    pass


class DimensionMismatch(TrajAlignError):
    pass


ShapeMismatch = DimensionMismatch
DimMismatch = DimensionMismatch


class SizeMismatch(TrajAlignError):
    pass


class NonFiniteInput(TrajAlignError):
    pass


class InsufficientSamples(TrajAlignError):
    pass


class TooShort(TrajAlignError):
    pass


class TooFewSteps(TrajAlignError):
    pass


class WindowTooLarge(TrajAlignError):
    pass


class DuplicateIds(TrajAlignError):
    pass


class InvalidConfig(TrajAlignError):
    exit_code = 2


class InvalidBeta(InvalidConfig):
    pass


# numeric degeneracies
class NumericError(TrajAlignError):
    exit_code = 5


class ZeroVariance(NumericError):
    pass


class AllTied(NumericError):
    pass


class AllColumnsDegenerate(NumericError):
    pass


class DegenerateRDM(NumericError):
    pass


class DegenerateSeries(NumericError):
    pass


class DegenerateProjection(NumericError):
    pass


class DegenerateVariance(NumericError):
    pass


class NotSymmetric(NumericError):
    pass


class ZeroMatrix(NumericError):
    pass


class ZeroTrace(NumericError):
    pass


class ZeroState(NumericError):
    pass


class NoValidPairs(NumericError):
    pass


# file format
class FormatError(TrajAlignError):
    exit_code = 3


class BadMagic(FormatError):
    pass


class ChecksumMismatch(FormatError):
    pass


class TruncatedFile(FormatError):
    pass


class MissingFile(FormatError):
    pass
