"""Exception types raised across the package.

Every failure mode callers are expected to handle has its own class so that
CLI and tests can match on the condition rather than on message text.
"""


class MelmaskError(Exception):
    """Base class for all package-specific errors."""


class WavFormatError(MelmaskError):
    """Input file is not mono 16-bit PCM WAV."""


class InsufficientAudioError(MelmaskError):
    """Waveform shorter than what the operation needs."""


class ShapeError(MelmaskError):
    """Operands have incompatible shapes; message names both."""


class ContractError(MelmaskError):
    """An API precondition was violated (e.g. backward on a non-scalar)."""


class DivergenceError(MelmaskError):
    """A gradient or loss component became non-finite."""


class DegenerateFilterbankError(MelmaskError):
    """Requested mel bands cannot be represented on the FFT grid."""


class DegenerateSequenceError(MelmaskError):
    """Frame sequence too short to split into positive and negative views."""


class NoMaskedFramesError(MelmaskError):
    """Prediction loss requested with an empty masked-index set."""


class DegenerateBatchError(MelmaskError):
    """Batch too small for cross-correlation statistics."""


class InputTooShortError(MelmaskError):
    """Spectrogram has fewer frames than the encoder's pooling pyramid needs."""


class ConfigError(MelmaskError):
    """Malformed or unknown key in a configuration file."""


class MatrixFormatError(MelmaskError):
    """Matrix file is corrupt, truncated, or of an unsupported version."""


class CheckpointError(MelmaskError):
    """Checkpoint file is corrupt, truncated, or incompatible."""


class DegenerateLabelsError(MelmaskError):
    """Probe training needs at least two classes present."""


class UndefinedMetricError(MelmaskError):
    """Metric is undefined for the given label distribution."""


class DataError(MelmaskError):
    """Dataset directory unreadable, empty, or inconsistent."""
