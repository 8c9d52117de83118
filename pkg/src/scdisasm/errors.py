"""Exception hierarchy shared across the toolkit.

The CLI maps these onto exit codes: configuration problems exit 2,
data and file problems exit 3, numeric failures exit 4.
"""


class ScdError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(ScdError):
    """Invalid or inconsistent run configuration."""


class DataError(ScdError):
    """Malformed, missing, or inconsistent input data."""


class NumericError(ScdError):
    """A numeric precondition failed during computation."""


# -- data problems -----------------------------------------------------------

class EmptyDataset(DataError):
    """Operation requires at least one record."""


class EmptyInput(DataError):
    """Operation requires a non-empty array."""


class RaggedTraces(DataError):
    """Traces in one container disagree in length."""


class DimensionMismatch(DataError):
    """Input vector length does not match the fitted window."""


class LengthMismatch(DataError):
    """Paired sequences disagree in length."""


class UnknownInstruction(DataError):
    """Mnemonic not present in the grouping table."""


class MissingGroup(DataError):
    """Training data does not cover every group of the table."""


class RangeViolation(DataError):
    """Values outside the required [0, 1] range."""


class IoError(DataError):
    """File could not be read or written."""


class FormatVersionMismatch(DataError):
    """File is not a supported dataset format version."""


class ChecksumMismatch(DataError):
    """File is truncated or its trailing CRC32 does not match."""


class TooFewSamples(DataError):
    """A class has too few samples to estimate its statistics."""


class InsufficientFeatures(DataError):
    """Requested more features than the matrix or selection provides."""


# -- numeric problems --------------------------------------------------------

class DegenerateSigma(NumericError):
    """Standard deviation too close to zero for entropy computation."""


class SingularCovariance(NumericError):
    """Covariance not positive definite even after regularization."""


class OverflowRisk(NumericError):
    """A quantized coefficient does not fit the 16-bit signed range."""


# -- warnings ----------------------------------------------------------------

class RankDeficientWarning(UserWarning):
    """Fewer nonzero principal components than requested."""
