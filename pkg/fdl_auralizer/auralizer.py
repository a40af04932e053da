"""
Integrated synthesis and feedback-cancellation pipeline for one microphone and C_out
loudspeakers.

Per block n:

1. the conditioned input is m~_n = g * m_n - f^_n, where f^_n is the feedback estimate computed
   from the previous output block (zero before the first block);
2. the loudspeaker block l_n is m~_n filtered by the C_out synthesis filters (broadcast);
3. l_n is filtered channel by channel with the feedback-cancellation filters F^ and the C_out
   results are summed into f^_{n+1};
4. l_n is returned.

F^ includes the whole loop latency measured from the instant l_n starts playing, which the engine
maps onto the next input block. The loudspeaker block never leaves the backend's memory space
between stages 2 and 3.
"""

from collections.abc import Sequence
from typing import Any

import numpy as np

from fdl_auralizer import exceptions
from fdl_auralizer.backends import Backend, get_backend
from fdl_auralizer.blocks import AudioBlock, Mode, coerce_filters, split_blocks
from fdl_auralizer.config import EngineConfig, validate_config
from fdl_auralizer.convolver import Convolver
from fdl_auralizer.logging import backend_logger, logger


class Auralizer:
    """Synthesis convolver (1 -> C_out) chained with a feedback-cancellation convolver
    (C_out -> C_out) on one backend.

    Attributes:
        cfg (EngineConfig): Engine configuration of the synthesis stage (C_in = 1).
        synth (Convolver): Broadcast convolver with the synthesis filters H_aur.
        fc (Convolver): Elementwise convolver with the feedback-cancellation filters F^.
        input_gain (float): Scalar applied to the microphone block before cancellation.
        backend (Backend): Backend shared by both convolvers.
    """

    def __init__(
        self,
        synth_filters: Sequence[Any] | np.ndarray,
        fc_filters: Sequence[Any] | np.ndarray,
        cfg: EngineConfig,
        input_gain: float = 1.0,
        backend: "str | Backend" = "reference",
    ):
        """Create both convolvers and zero the feedback estimate.

        Args:
            synth_filters (Sequence[Any] | np.ndarray): C_out synthesis filters of length
                n_h_aur.
            fc_filters (Sequence[Any] | np.ndarray): C_out feedback-cancellation filters of
                length n_h_fc.
            cfg (EngineConfig): Configuration with C_in = 1.
            input_gain (float, optional): Microphone gain. Defaults to 1.0.
            backend (str | Backend, optional): Backend name or object. Defaults to
                "reference".

        Raises:
            exceptions.ModeChannelMismatch: When `cfg.input_channels` is not 1.
            exceptions.ChannelCountMismatch: When the two filter sets (or the config) disagree
                on C_out.
        """
        self.cfg = validate_config(cfg)
        if cfg.input_channels != 1:
            raise exceptions.ModeChannelMismatch(
                f"The auralizer takes a single microphone, config has C_in={cfg.input_channels}"
            )
        synth_filters = coerce_filters(synth_filters)
        fc_filters = coerce_filters(fc_filters)
        if not len(synth_filters) == len(fc_filters) == cfg.output_channels:
            logger.error(
                "Channel counts differ: synthesis=%s, feedback cancellation=%s, config=%s",
                len(synth_filters),
                len(fc_filters),
                cfg.output_channels,
            )
            raise exceptions.ChannelCountMismatch(
                f"Synthesis ({len(synth_filters)}) and feedback-cancellation "
                f"({len(fc_filters)}) filter sets must both have C_out={cfg.output_channels} rows"
            )
        self.backend = get_backend(backend)
        self.input_gain = float(input_gain)
        self.synth = Convolver(synth_filters, cfg, Mode.BROADCAST, backend=self.backend)
        self.fc = Convolver(
            fc_filters,
            cfg.with_channels(cfg.output_channels, cfg.output_channels),
            Mode.ELEMENTWISE,
            backend=self.backend,
        )
        self._estimate = self.backend.zeros((cfg.block_size,))
        self._conditioned = self.backend.zeros((1, cfg.block_size))
        self._log = backend_logger(self.backend.name)
        self._log.info(
            "Created auralizer: K_aur=%s, K_fc=%s", self.synth_partitions, self.fc_partitions
        )

    @property
    def synth_partitions(self) -> int:
        """K_aur."""
        return self.synth.partition_count

    @property
    def fc_partitions(self) -> int:
        """K_fc."""
        return self.fc.partition_count

    @property
    def feedback_estimate(self) -> np.ndarray:
        """Host copy of the feedback estimate that will be subtracted from the next block."""
        return self.backend.to_host(self._estimate)

    @property
    def last_conditioned(self) -> np.ndarray:
        """Host copy of m~ for the most recent block, shape `(n_x,)`."""
        return self.backend.to_host(self._conditioned)[0]

    def auralize(self, mic_block: AudioBlock | np.ndarray, out: np.ndarray | None = None):
        """Process one microphone block and return the loudspeaker block.

        Args:
            mic_block (AudioBlock | np.ndarray): Finite samples, shape `(1, n_x)` or `(n_x,)`.
            out (np.ndarray | None, optional): Caller-owned float32 `(C_out, n_x)` destination.
                Defaults to None.

        Raises:
            exceptions.ShapeMismatch: When the block is not a single channel of n_x samples.
            exceptions.NonFiniteInput: When a sample is NaN or infinite.

        Returns:
            np.ndarray: float32 loudspeaker block of shape `(C_out, n_x)`.
        """
        data = AudioBlock.from_array(mic_block, 1, self.cfg.block_size).data
        speakers = self._auralize_native(self.backend.asarray(data))
        return self.backend.to_host(speakers, out=out)

    def auralize_signal(self, signal: Any) -> np.ndarray:
        """Stream a whole mono signal through `auralize`, continuing from the current state.
        The final partial block is zero-padded.

        Returns:
            np.ndarray: float32 loudspeaker signals of shape `(C_out, blocks * n_x)`.
        """
        blocks = split_blocks(signal, self.cfg.block_size)
        output = np.empty(
            (len(blocks), self.cfg.output_channels, self.cfg.block_size), dtype=np.float32
        )
        for index, block in enumerate(blocks):
            self.auralize(block, out=output[index])
        return output.transpose(1, 0, 2).reshape(self.cfg.output_channels, -1)

    def _auralize_native(self, mic: Any) -> Any:
        """Fused path on backend-native arrays; the returned view is overwritten next call."""
        self.backend.condition(mic, self.input_gain, self._estimate, out=self._conditioned)
        speakers = self.synth.process_native(self._conditioned)
        self.backend.channel_sum(self.fc.process_native(speakers), out=self._estimate)
        return speakers

    def reset(self) -> None:
        """Reset both convolvers and zero the feedback estimate."""
        self.synth.reset()
        self.fc.reset()
        self._estimate[...] = 0
        self._conditioned[...] = 0
        self._log.debug("Reset auralizer")


def create_auralizer(
    synth_filters: Sequence[Any] | np.ndarray,
    fc_filters: Sequence[Any] | np.ndarray,
    cfg: EngineConfig,
    input_gain: float = 1.0,
    device: "str | Backend" = "reference",
) -> Auralizer:
    """Create an auralizer (see `Auralizer.__init__`)."""
    return Auralizer(synth_filters, fc_filters, cfg, input_gain=input_gain, backend=device)
