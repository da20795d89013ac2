"""Exception hierarchy.

Every error raised on purpose by the package derives from :class:`PolarError`,
which itself is a :class:`ValueError` so that callers treating bad input
generically keep working.
"""


class PolarError(ValueError):
    """Base class for all package errors."""


# channel construction / functionals
class NonStochasticRow(PolarError):
    pass


class NegativeEntry(PolarError):
    pass


class EmptyAlphabet(PolarError):
    pass


class DuplicateLabel(PolarError):
    pass


class EqualInputs(PolarError):
    pass


class IndexOutOfRange(PolarError, IndexError):
    pass


class GroupSizeMismatch(PolarError):
    pass


class OutOfRange(PolarError):
    pass


class BudgetTooSmall(PolarError):
    pass


# algebra
class NotPrimePower(PolarError):
    pass


class EnumerationTooLarge(PolarError):
    pass


class EvenCharacteristic(PolarError):
    pass


class InvalidPermutation(PolarError):
    pass


# kernels
class AlgebraMismatch(PolarError):
    pass


class EmptyPermutationSet(PolarError):
    pass


class InvalidMultiplier(PolarError):
    pass


class BadFactorization(PolarError):
    pass


class BadMap(PolarError):
    pass


# construction
class BadDelta(PolarError):
    pass


class KOutOfRange(PolarError):
    pass


class BadBeta(PolarError):
    pass


# codec
class LengthMismatch(PolarError):
    pass


class IncompleteSchedule(PolarError):
    pass


class DegenerateLikelihood(PolarError):
    pass


class SpecMismatch(PolarError):
    pass


# harness
class BadParam(PolarError):
    pass


class FileParseError(PolarError):
    pass
