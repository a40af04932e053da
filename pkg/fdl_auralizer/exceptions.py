# pylint: disable=missing-module-docstring


class FdlAuralizerException(Exception):
    """Base exception type for errors raised from fdl-auralizer."""


## Configuration
class ConfigError(FdlAuralizerException):
    """When an `EngineConfig` (or a settings file feeding one) violates its invariants."""


class NonPowerOfTwoBlock(ConfigError):
    """Block size is not a power of two in [16, 8192]."""


class FftSizeMismatch(ConfigError):
    """FFT size is not exactly twice the block size."""


class BadChannelCombination(ConfigError):
    """Input channel count is neither 1 nor the output channel count."""


class ZeroSampleRate(ConfigError):
    """Sample rate is not a positive integer."""


## Lengths
class ZeroLength(FdlAuralizerException):
    """A filter or block length of zero was given where a positive length is required."""


class EmptyInput(FdlAuralizerException):
    """A reference computation was handed an empty signal or filter."""


class EmptyFilter(FdlAuralizerException):
    """A convolver was handed no filters, or filters of length zero."""


## Transforms
class LengthMismatch(FdlAuralizerException):
    """A transform buffer or spectrum does not match the plan size."""


class NonRealEdgeBins(FdlAuralizerException):
    """The DC or Nyquist bin of a spectrum handed to the inverse transform is not real."""


## Engine contracts
class ShapeMismatch(FdlAuralizerException):
    """A block, spectrum set or delay line has dimensions other than the engine expects."""


class NonFiniteInput(FdlAuralizerException):
    """An input block contains NaN or infinite samples."""


class FilterLengthMismatch(FdlAuralizerException):
    """The filters of one set do not all have the same length."""


class ModeChannelMismatch(FdlAuralizerException):
    """The convolution mode is inconsistent with the configured channel counts."""


class ChannelCountMismatch(FdlAuralizerException):
    """Synthesis and feedback-cancellation filter sets disagree on the channel count."""


## Backends and benchmarking
class BackendUnavailable(FdlAuralizerException):
    """The requested execution backend is unknown or not available on this machine."""


class OutOfMemory(FdlAuralizerException):
    """A benchmark configuration could not be allocated on its backend."""


class CorruptRecord(FdlAuralizerException):
    """A timing record is inconsistent, or a results CSV row cannot be parsed back."""


## Audio files
class AudioFileError(FdlAuralizerException):
    """When there's something wrong with a filter or signal file."""


class UnsupportedFormat(AudioFileError):
    """The file is neither a 32-bit float WAV nor a raw f32le file with a sidecar."""


class CorruptHeader(AudioFileError):
    """The WAV header or the raw sidecar cannot be parsed, or disagrees with the payload."""


class SampleRateMismatch(AudioFileError):
    """The file sample rate differs from the configured engine sample rate."""
