"""Exception hierarchy shared by every module."""


class LessNoisyError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(LessNoisyError, ValueError):
    """A probability vector or channel matrix is malformed."""


class NegativeEntry(ValidationError):
    pass


class RowSumNotOne(ValidationError):
    def __init__(self, row: int, total: float, context: str = ""):
        self.row = row
        self.total = total
        where = f"{context}: " if context else ""
        super().__init__(f"{where}row {row} sums to {total!r}, expected 1")


class DimensionMismatch(LessNoisyError, ValueError):
    pass


class AlphabetOverflow(LessNoisyError):
    """An enumerated or product alphabet exceeds its configured cap."""


class AllZeroWeights(LessNoisyError, ValueError):
    pass


class NotApplicable(LessNoisyError):
    """A builtin construction does not apply to the given channel."""


class MemoryCapExceeded(LessNoisyError):
    pass


class ParseError(LessNoisyError):
    pass
