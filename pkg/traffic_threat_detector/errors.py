"""
Exception hierarchy for the detection pipeline.

Every error carries the process exit code the command line maps it to.
"""

from .constants import EXIT_DATA_ERROR, EXIT_INTERNAL_ERROR, EXIT_USAGE_ERROR


class DetectorError(Exception):
    exit_code: int = EXIT_INTERNAL_ERROR


class ConfigError(DetectorError, ValueError):
    exit_code = EXIT_USAGE_ERROR


class BadConfig(ConfigError):
    pass


class BadTruncation(ConfigError):
    pass


class DataError(DetectorError, ValueError):
    exit_code = EXIT_DATA_ERROR


class MissingColumn(DataError):
    pass


class RaggedRow(DataError):
    pass


class UnknownLabel(DataError):
    pass


class MalformedCapture(DataError):
    pass


class ArityMismatch(DataError):
    pass


class EmptyCorpus(DataError):
    pass


class CorruptFile(DataError):
    pass


class MissingFile(DataError, FileNotFoundError):
    pass


class IdOutOfRange(DataError):
    pass


class SequenceTooLong(DataError):
    pass


class ShapeMismatch(DataError):
    pass


class BadLabel(DataError):
    pass


class LengthMismatch(DataError):
    pass


class LabelOutOfRange(DataError):
    pass


class DegenerateClass(DataError):
    pass


class VersionMismatch(DataError):
    pass


class CorruptCheckpoint(DataError):
    pass


class VocabMismatch(DataError):
    pass


class FitFailed(DataError):
    pass


class NonFiniteLoss(DetectorError, ArithmeticError):
    exit_code = EXIT_INTERNAL_ERROR

    def __init__(self, step: int, learning_rate: float, grad_norm: float, loss: float) -> None:
        self.step = step
        self.learning_rate = learning_rate
        self.grad_norm = grad_norm
        self.loss = loss
        super().__init__(
            f"Non-finite loss {loss} at step {step} (lr={learning_rate}, grad_norm={grad_norm})"
        )
