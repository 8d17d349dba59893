"""Exception hierarchy.

Every error raised by the package derives from :class:`FairCCAError`.  The
three intermediate classes map onto the CLI exit codes (2 config, 3 data,
4 numerical failure).
"""


class FairCCAError(Exception):
    exit_code = 1


class ConfigError(FairCCAError):
    exit_code = 2


class DataError(FairCCAError):
    exit_code = 3


class NumericalError(FairCCAError):
    exit_code = 4


# configuration / contract violations
class RankTooLarge(ConfigError):
    pass


# data problems
class ShapeMismatch(DataError):
    pass


class ConstantColumn(DataError):
    def __init__(self, column: int):
        super().__init__(f"column {column} has zero variance")
        self.column = column


class DegenerateAttribute(DataError):
    pass


class AttributeOrthogonal(DataError):
    pass


class DegenerateLabels(DataError):
    pass


class SingleClass(DataError):
    pass


class ClassTooSmall(DataError):
    pass


class MissingGroup(DataError):
    pass


class SampleTooSmall(DataError):
    pass


class ConstantSample(DataError):
    pass


class AllZeroDifferences(DataError):
    pass


class ParseError(DataError):
    def __init__(self, path, row: int, col: int, value: str):
        super().__init__(f"{path}: cannot parse {value!r} at row {row}, column {col}")
        self.row = row
        self.col = col


class RowCountMismatch(DataError):
    pass


class NonBinaryColumn(DataError):
    pass


# numerical failures
class SingularCovariance(NumericalError):
    pass


class DegenerateDirection(NumericalError):
    pass


class ZeroBaseline(NumericalError):
    def __init__(self, index: int):
        super().__init__(f"baseline entry {index} is zero")
        self.index = index


class NotPSD(NumericalError):
    pass


class RetryExhausted(NumericalError):
    pass


class NonConvergence(NumericalError):
    pass


class ZeroVariance(NumericalError):
    pass
