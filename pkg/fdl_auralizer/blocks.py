"""
Domain types for block streaming: time-domain audio blocks, real-FFT spectra, partitioned filter
sets in the frequency domain, and the frequency delay line (FDL) of recent input spectra.

Audio is planar (channel-major): a block is a `(channels, samples)` array, so per-channel kernels
read contiguous memory. Engine data is single precision (float32 / complex64).
"""

from collections.abc import Callable, Sequence
from dataclasses import dataclass
from enum import Enum
from typing import TYPE_CHECKING, Any

import numpy as np

from fdl_auralizer import exceptions
from fdl_auralizer.config import partition_count

if TYPE_CHECKING:
    from fdl_auralizer.dft import DftPlan

SAMPLE_DTYPE = np.float32
SPECTRUM_DTYPE = np.complex64


class Mode(str, Enum):
    """How input channels map onto filters.

    BROADCAST: one input channel filtered by each of the C_out filters (C_in = 1).
    ELEMENTWISE: input channel c filtered by filter c only (C_in = C_out).
    """

    BROADCAST = "broadcast"
    ELEMENTWISE = "elementwise"


@dataclass(frozen=True)
class AudioBlock:
    """One block of planar audio.

    Attributes:
        data (np.ndarray): C-contiguous float32 array of shape `(channels, samples_per_channel)`
            holding only finite samples.
    """

    data: np.ndarray

    def __post_init__(self):
        if self.data.ndim != 2 or self.data.dtype != SAMPLE_DTYPE:
            raise exceptions.ShapeMismatch(
                f"Audio blocks are 2-D float32 arrays, got {self.data.dtype} {self.data.shape}"
            )
        if not np.isfinite(self.data).all():
            raise exceptions.NonFiniteInput("Audio block contains NaN or infinite samples")

    @classmethod
    def from_array(
        cls, array: Any, channels: int | None = None, samples_per_channel: int | None = None
    ) -> "AudioBlock":
        """Specialized constructor coercing array-likes to a validated block. One-dimensional
        input is read as a single channel.

        Args:
            array (Any): Array-like of shape `(samples,)` or `(channels, samples)`.
            channels (int | None, optional): Required channel count. Defaults to None (any).
            samples_per_channel (int | None, optional): Required block length. Defaults to None
                (any).

        Raises:
            exceptions.ShapeMismatch: When the dimensions differ from the required ones.
            exceptions.NonFiniteInput: When a sample is NaN or infinite.

        Returns:
            AudioBlock: The validated block (sharing memory with `array` when it already is a
                contiguous float32 array).
        """
        if isinstance(array, AudioBlock):
            array = array.data
        data = np.ascontiguousarray(array, dtype=SAMPLE_DTYPE)
        if data.ndim == 1:
            data = data[np.newaxis, :]
        if data.ndim != 2:
            raise exceptions.ShapeMismatch(f"Expected a (channels, samples) block: {data.shape}")
        expected = (
            channels if channels is not None else data.shape[0],
            samples_per_channel if samples_per_channel is not None else data.shape[1],
        )
        if data.shape != expected:
            raise exceptions.ShapeMismatch(
                f"Expected a block of shape {expected}, got {data.shape}"
            )
        return cls(data)

    @property
    def channels(self) -> int:
        """Channel count."""
        return self.data.shape[0]

    @property
    def samples_per_channel(self) -> int:
        """Samples per channel (the block size n_x when streamed through an engine)."""
        return self.data.shape[1]


@dataclass(frozen=True)
class SpectrumBlock:
    """One real-FFT spectrum: n_f / 2 + 1 complex bins, whose DC and Nyquist bins are real.

    Attributes:
        bins (np.ndarray): One-dimensional complex array.
    """

    bins: np.ndarray

    def __post_init__(self):
        if self.bins.ndim != 1 or not np.iscomplexobj(self.bins):
            raise exceptions.ShapeMismatch(
                f"Spectra are 1-D complex arrays, got {self.bins.dtype} {self.bins.shape}"
            )

    @property
    def bin_count(self) -> int:
        """Number of bins."""
        return self.bins.shape[0]

    @property
    def fft_size(self) -> int:
        """Length n_f of the real buffer this spectrum was taken from."""
        return 2 * (self.bin_count - 1)


def split_blocks(signal: Any, block_size: int) -> np.ndarray:
    """Cut a planar signal into consecutive blocks, zero-padding the final partial block.

    Args:
        signal (Any): Array of shape `(samples,)` or `(channels, samples)`.
        block_size (int): Block length n_x.

    Returns:
        np.ndarray: float32 array of shape `(blocks, channels, block_size)` where
            `blocks = ceil(samples / block_size)`.
    """
    data = np.asarray(signal, dtype=SAMPLE_DTYPE)
    if data.ndim == 1:
        data = data[np.newaxis, :]
    channels, samples = data.shape
    blocks = -(-samples // block_size)
    padded = np.zeros((channels, blocks * block_size), dtype=SAMPLE_DTYPE)
    padded[:, :samples] = data
    return np.ascontiguousarray(padded.reshape(channels, blocks, block_size).transpose(1, 0, 2))


def coerce_filters(filters: Sequence[Any] | np.ndarray) -> np.ndarray:
    """Stack a set of time-domain filters into a `(count, length)` float64 array.

    Args:
        filters (Sequence[Any] | np.ndarray): 2-D array, or a sequence of 1-D array-likes.

    Raises:
        exceptions.EmptyFilter: When there is no filter or the filters are empty.
        exceptions.FilterLengthMismatch: When the filters have different lengths.
        exceptions.NonFiniteInput: When a coefficient is NaN or infinite.

    Returns:
        np.ndarray: The stacked filters.
    """
    if isinstance(filters, np.ndarray) and filters.ndim == 2:
        rows = list(filters)
    else:
        rows = [np.ravel(np.asarray(row, dtype=np.float64)) for row in filters]
    if not rows:
        raise exceptions.EmptyFilter("At least one filter is required")
    lengths = {row.shape[0] for row in rows}
    if len(lengths) > 1:
        raise exceptions.FilterLengthMismatch(
            f"All filters must have the same length, got lengths {sorted(lengths)}"
        )
    if 0 in lengths:
        raise exceptions.EmptyFilter("Filters must contain at least one coefficient")
    stacked = np.asarray(rows, dtype=np.float64)
    if not np.isfinite(stacked).all():
        raise exceptions.NonFiniteInput("Filters contain NaN or infinite coefficients")
    return stacked


@dataclass(frozen=True)
class PartitionedFilterSet:
    """Frequency-domain form of a filter set: each filter split into K sub-filters of n_x
    samples, each zero-padded to n_f = 2 n_x and transformed.

    Attributes:
        spectra (np.ndarray): complex64 array of shape `(num_channels, K, n_x + 1)`.
        filter_length (int): Time-domain filter length n_h.
        block_size (int): Partition length n_x.
    """

    spectra: np.ndarray
    filter_length: int
    block_size: int

    def __post_init__(self):
        if self.spectra.ndim != 3 or self.spectra.shape[2] != self.block_size + 1:
            raise exceptions.ShapeMismatch(
                f"Partition spectra must have shape (C, K, {self.block_size + 1}), got "
                f"{self.spectra.shape}"
            )

    @classmethod
    def from_filters(
        cls, filters: Sequence[Any] | np.ndarray, block_size: int, plan: "DftPlan"
    ) -> "PartitionedFilterSet":
        """Partition and transform a set of time-domain filters. The tail of the last partition
        is zero-padded to n_x samples, then every partition gets n_x more zeros.

        Args:
            filters (Sequence[Any] | np.ndarray): C time-domain filters of equal length n_h.
            block_size (int): Partition length n_x.
            plan (DftPlan): Transform plan of size 2 n_x.

        Raises:
            exceptions.EmptyFilter: When there is no filter or the filters are empty.
            exceptions.FilterLengthMismatch: When the filters have different lengths.

        Returns:
            PartitionedFilterSet: The partition spectra.
        """
        stacked = coerce_filters(filters)
        num_channels, filter_length = stacked.shape
        partitions = partition_count(filter_length, block_size)
        spectra = np.empty((num_channels, partitions, block_size + 1), dtype=SPECTRUM_DTYPE)
        # One channel at a time keeps the float64 scratch at K * n_f samples.
        padded = np.zeros((partitions, 2 * block_size), dtype=np.float64)
        for channel, coefficients in enumerate(stacked):
            padded[:, :block_size] = np.pad(
                coefficients, (0, partitions * block_size - filter_length)
            ).reshape(partitions, block_size)
            spectra[channel] = plan.forward(padded)
        return cls(spectra=spectra, filter_length=filter_length, block_size=block_size)

    @property
    def num_channels(self) -> int:
        """Filter count C_out."""
        return self.spectra.shape[0]

    @property
    def partition_count(self) -> int:
        """Sub-filter count K."""
        return self.spectra.shape[1]

    @property
    def bin_count(self) -> int:
        """Bins per spectrum, n_x + 1."""
        return self.spectra.shape[2]

    def spectrum(self, channel: int, partition: int) -> SpectrumBlock:
        """Spectrum of sub-filter `partition` of filter `channel`."""
        return SpectrumBlock(self.spectra[channel, partition])


def host_zeros(shape: tuple[int, ...]) -> np.ndarray:
    """Zeroed complex64 host array."""
    return np.zeros(shape, dtype=SPECTRUM_DTYPE)


class FrequencyDelayLine:
    """Ring of the K most recent input spectra per input channel. Slot 0 holds the newest
    spectrum and slot K - 1 the oldest; pushing a spectrum ages every slot by one block.

    The ring is stored twice back to back (2K rows per channel) and the head moves backwards,
    so the K logical slots are always one contiguous slice and no spectrum is ever moved.

    Attributes:
        channels (int): Number of independent rings (input channels).
        capacity (int): Slot count K.
        bin_count (int): Bins per spectrum.
    """

    def __init__(
        self,
        channels: int,
        capacity: int,
        bin_count: int,
        allocate: Callable[[tuple[int, ...]], Any] | None = None,
    ):
        """Construct a zeroed delay line.

        Args:
            channels (int): Number of input channels.
            capacity (int): Slot count K (the partition count of the paired filters).
            bin_count (int): Bins per spectrum.
            allocate (Callable[[tuple[int, ...]], Any] | None, optional): Factory returning a
                zeroed complex array of the given shape; lets a backend keep the ring in its
                own memory space. Defaults to a host complex64 `numpy.zeros`.

        Raises:
            exceptions.ZeroLength: When a dimension is not positive.
        """
        if min(channels, capacity, bin_count) < 1:
            raise exceptions.ZeroLength(
                f"Delay line dimensions must be positive: {(channels, capacity, bin_count)}"
            )
        self.channels = channels
        self.capacity = capacity
        self.bin_count = bin_count
        self._storage = (allocate or host_zeros)((channels, 2 * capacity, bin_count))
        self._head = 0

    @property
    def head(self) -> int:
        """Storage row of slot 0."""
        return self._head

    def push(self, spectra: Any) -> None:
        """Insert the newest spectrum of every channel; the oldest one falls off the end.

        Args:
            spectra (Any): Array of shape `(channels, bin_count)` in the storage's memory space.
        """
        self._head = (self._head - 1) % self.capacity
        self._storage[:, self._head] = spectra
        self._storage[:, self._head + self.capacity] = spectra

    def view(self) -> Any:
        """All slots in logical order, shape `(channels, K, bin_count)` (a view, not a copy)."""
        return self._storage[:, self._head : self._head + self.capacity]

    def slots(self, channel: int = 0) -> Any:
        """Slots of one channel in logical order, shape `(K, bin_count)` (a view)."""
        return self._storage[channel, self._head : self._head + self.capacity]

    def slot(self, index: int, channel: int = 0) -> Any:
        """Spectrum stored `index` blocks ago for one channel (a view)."""
        if not 0 <= index < self.capacity:
            raise IndexError(f"Slot {index} outside [0, {self.capacity})")
        return self._storage[channel, self._head + index]

    def reset(self) -> None:
        """Zero every slot and rewind the head."""
        self._storage[...] = 0
        self._head = 0
