"""
Uniform partitioned convolution as a block-streaming processor.

Each call to `Convolver.convolve` runs the three stages of the frequency-delay-line algorithm:

1. input packing: the sliding window of n_f = 2 n_x samples is left-shifted by n_x and the new
   block is appended, then the window is transformed once per input channel;
2. the new spectrum enters the FDL and the K slots are multiplied with the K sub-filter spectra
   and accumulated per output channel;
3. output unpacking: the accumulated spectrum is inverse transformed and, by overlap-save, only
   its last n_x samples are kept.

After B calls the concatenated outputs equal the first B * n_x samples of the linear convolution
of the concatenated inputs with each filter.
"""

from collections.abc import Sequence
from typing import Any

import numpy as np

from fdl_auralizer import exceptions
from fdl_auralizer.backends import Backend, ConvolutionKernel, get_backend
from fdl_auralizer.blocks import AudioBlock, Mode, PartitionedFilterSet, split_blocks
from fdl_auralizer.config import EngineConfig, validate_config
from fdl_auralizer.dft import DftPlan
from fdl_auralizer.logging import backend_logger

__all__ = ["Convolver", "Mode", "create_convolver", "infer_mode"]


def infer_mode(cfg: EngineConfig) -> Mode:
    """Default channel mapping for a configuration: broadcast when C_in = 1."""
    return Mode.BROADCAST if cfg.input_channels == 1 else Mode.ELEMENTWISE


class Convolver:
    """Stateful uniform partitioned convolver for C_out filters.

    One logical owner must serialize `convolve` and `reset` calls; the instance may move
    between threads between calls. Backends may parallelize inside a call.

    Attributes:
        cfg (EngineConfig): Engine sizing.
        mode (Mode): Broadcast (1 -> C_out) or elementwise (C_out -> C_out).
        filters (PartitionedFilterSet): Host copy of the sub-filter spectra.
        backend (Backend): Execution backend holding the streaming state.
        blocks_processed (int): Blocks convolved since creation or the last reset.
    """

    def __init__(
        self,
        filters: Sequence[Any] | np.ndarray,
        cfg: EngineConfig,
        mode: Mode | str | None = None,
        backend: "str | Backend" = "reference",
    ):
        """Partition and transform the filters and allocate every streaming buffer; no
        allocation proportional to the filters happens in later `convolve` calls.

        Args:
            filters (Sequence[Any] | np.ndarray): C_out time-domain filters of equal length.
            cfg (EngineConfig): Engine configuration.
            mode (Mode | str | None, optional): Channel mapping. Defaults to None (inferred
                from `cfg.input_channels`).
            backend (str | Backend, optional): Backend name or object. Defaults to
                "reference".

        Raises:
            exceptions.ConfigError: When `cfg` is invalid.
            exceptions.ModeChannelMismatch: When the mode disagrees with the channel counts.
            exceptions.ShapeMismatch: When the filter count is not C_out.
            exceptions.EmptyFilter: When there are no filters or they are empty.
            exceptions.FilterLengthMismatch: When the filters are ragged.
            exceptions.BackendUnavailable: When the backend cannot be used here.
        """
        self.cfg = validate_config(cfg)
        self.mode = infer_mode(cfg) if mode is None else Mode(mode)
        if self.mode is Mode.BROADCAST and cfg.input_channels != 1:
            raise exceptions.ModeChannelMismatch(
                f"Broadcast mode needs one input channel, config has {cfg.input_channels}"
            )
        if self.mode is Mode.ELEMENTWISE and cfg.input_channels != cfg.output_channels:
            raise exceptions.ModeChannelMismatch(
                f"Elementwise mode needs C_in = C_out, config has C_in={cfg.input_channels}, "
                f"C_out={cfg.output_channels}"
            )
        self.backend = get_backend(backend)
        self.filters = PartitionedFilterSet.from_filters(
            filters, cfg.block_size, DftPlan(cfg.fft_size)
        )
        if self.filters.num_channels != cfg.output_channels:
            raise exceptions.ShapeMismatch(
                f"Expected {cfg.output_channels} filters, got {self.filters.num_channels}"
            )
        self.kernel: ConvolutionKernel = self.backend.create_kernel(self.filters, cfg, self.mode)
        self.blocks_processed = 0
        self._log = backend_logger(self.backend.name)
        self._log.info(
            "Created %s convolver: C_out=%s, n_h=%s, n_x=%s, K=%s",
            self.mode.value,
            cfg.output_channels,
            self.filters.filter_length,
            cfg.block_size,
            self.partition_count,
        )

    @property
    def partition_count(self) -> int:
        """Sub-filter count K."""
        return self.filters.partition_count

    @property
    def input_shape(self) -> tuple[int, int]:
        """Shape `(C_in, n_x)` of an input block."""
        return (self.cfg.input_channels, self.cfg.block_size)

    @property
    def output_shape(self) -> tuple[int, int]:
        """Shape `(C_out, n_x)` of an output block."""
        return (self.cfg.output_channels, self.cfg.block_size)

    def process_native(self, block: Any) -> Any:
        """Convolve one block that already lives in the backend's memory space, skipping
        validation. Returns a view of a backend buffer that the next call overwrites.

        Args:
            block (Any): Backend-native array of shape `(C_in, n_x)`.

        Returns:
            Any: Backend-native `(C_out, n_x)` view.
        """
        self.blocks_processed += 1
        return self.kernel.process(block)

    def convolve(
        self, block: AudioBlock | np.ndarray, out: np.ndarray | None = None
    ) -> np.ndarray:
        """Filter one input block and return the matching output block.

        Args:
            block (AudioBlock | np.ndarray): Finite samples of shape `(C_in, n_x)`; a 1-D array
                of n_x samples is accepted when C_in = 1.
            out (np.ndarray | None, optional): Caller-owned float32 `(C_out, n_x)` destination.
                Defaults to None (a new array is returned).

        Raises:
            exceptions.ShapeMismatch: When the block dimensions differ from `input_shape`.
            exceptions.NonFiniteInput: When a sample is NaN or infinite.

        Returns:
            np.ndarray: float32 output of shape `(C_out, n_x)` (`out` when given).
        """
        data = AudioBlock.from_array(block, *self.input_shape).data
        result = self.process_native(self.backend.asarray(data))
        return self.backend.to_host(result, out=out)

    def convolve_signal(self, signal: Any) -> np.ndarray:
        """Stream a whole planar signal through `convolve`, block by block, continuing from
        the current state. The final partial block is zero-padded.

        Args:
            signal (Any): Array of shape `(C_in, samples)` (or `(samples,)` when C_in = 1).

        Returns:
            np.ndarray: float32 output of shape `(C_out, blocks * n_x)`.
        """
        blocks = split_blocks(signal, self.cfg.block_size)
        output = np.empty((len(blocks),) + self.output_shape, dtype=np.float32)
        for index, block in enumerate(blocks):
            self.convolve(block, out=output[index])
        return output.transpose(1, 0, 2).reshape(self.cfg.output_channels, -1)

    def reset(self) -> None:
        """Return to the freshly created state: windows, FDL and accumulators zeroed."""
        self.kernel.reset()
        self.blocks_processed = 0
        self._log.debug("Reset convolver (K=%s)", self.partition_count)


def create_convolver(
    filters: Sequence[Any] | np.ndarray,
    cfg: EngineConfig,
    mode: Mode | str | None = None,
    device: "str | Backend" = "reference",
) -> Convolver:
    """Create a convolver (see `Convolver.__init__`)."""
    return Convolver(filters, cfg, mode, backend=device)
