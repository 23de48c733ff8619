"""Exception hierarchy shared across the package."""


class GQAError(Exception):
    """Base class for all errors raised by gqa."""


class DimensionError(GQAError, ValueError):
    """Operand shapes do not conform to an operation's rules."""


class NumericError(GQAError, FloatingPointError):
    """A computation produced NaN or Inf."""


class ContractError(GQAError, ValueError):
    """A documented precondition was violated by the caller."""


class IngestionError(GQAError, ValueError):
    """A corpus record could not be turned into an Example."""


class ParseError(GQAError, ValueError):
    """An input file is malformed (JSON, embedding text, config)."""


class CheckpointError(GQAError, ValueError):
    """A checkpoint is corrupt or does not match the requested dimensions."""


class TrainingError(GQAError, RuntimeError):
    """Training had to be aborted (e.g. non-finite loss)."""
