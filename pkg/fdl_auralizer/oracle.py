"""
Ground-truth references for the engine: direct time-domain convolution in float64 and a
closed-loop simulator of one microphone picking up C_out loudspeakers.

The simulator computes the physical feedback with `direct_convolve`, never with the engine under
test. Its loop alignment matches the auralizer's convention: the response of loudspeaker block
l_n starts arriving at the microphone in block n + 1, so F^ = F cancels exactly.

The maximum stable gain helper evaluates the loop at the frequencies where its phase is a
multiple of 2 pi.
"""

from collections.abc import Sequence
from dataclasses import dataclass
from typing import Any

import numpy as np
from scipy import signal

from fdl_auralizer import exceptions
from fdl_auralizer.auralizer import Auralizer
from fdl_auralizer.backends import Backend
from fdl_auralizer.blocks import coerce_filters
from fdl_auralizer.config import EngineConfig
from fdl_auralizer.convolver import Convolver
from fdl_auralizer.logging import logger


def direct_convolve(x: Any, h: Any) -> np.ndarray:
    """Full linear convolution y[t] = sum_tau x[tau] h[t - tau], summed directly in float64.

    Args:
        x (Any): Signal of N >= 1 samples.
        h (Any): Filter of n_h >= 1 taps.

    Raises:
        exceptions.EmptyInput: When either operand is empty.

    Returns:
        np.ndarray: float64 array of N + n_h - 1 samples.
    """
    x = np.ravel(np.asarray(x, dtype=np.float64))
    h = np.ravel(np.asarray(h, dtype=np.float64))
    if x.size == 0 or h.size == 0:
        raise exceptions.EmptyInput(f"Cannot convolve empty operands: N={x.size}, n_h={h.size}")
    return np.convolve(x, h)


def scaled_random_filters(
    rng: np.random.Generator, count: int, length: int, gain: float = 1.0
) -> np.ndarray:
    """Standard-normal filters scaled by gain / sqrt(length), which keeps the output variance of
    a unit-variance input near gain**2.

    Returns:
        np.ndarray: float64 array of shape `(count, length)`.
    """
    return gain * rng.standard_normal((count, length)) / np.sqrt(length)


@dataclass
class ClosedLoopScenario:
    """One closed-loop experiment.

    Attributes:
        source (np.ndarray): Clean talker signal, at least `num_blocks * n_x` samples.
        true_feedback_paths (np.ndarray): Physical loudspeaker-to-microphone paths F,
            shape `(C_out, n_h_f)`.
        fc_filters (np.ndarray): Estimate F^ handed to the auralizer, shape `(C_out, n_h_fc)`.
        synth_filters (np.ndarray): Synthesis filters H_aur, shape `(C_out, n_h_aur)`.
        cfg (EngineConfig): Engine configuration (C_in = 1).
        num_blocks (int): Blocks to simulate.
        input_gain (float): Microphone gain of the auralizer. Defaults to 1.0.
    """

    # pylint: disable=too-many-instance-attributes
    source: np.ndarray
    true_feedback_paths: np.ndarray
    fc_filters: np.ndarray
    synth_filters: np.ndarray
    cfg: EngineConfig
    num_blocks: int
    input_gain: float = 1.0

    def __post_init__(self):
        self.source = np.ravel(np.asarray(self.source, dtype=np.float64))
        self.true_feedback_paths = coerce_filters(self.true_feedback_paths)
        self.fc_filters = coerce_filters(self.fc_filters)
        self.synth_filters = coerce_filters(self.synth_filters)
        if self.num_blocks < 1:
            raise exceptions.ZeroLength(f"num_blocks must be positive: {self.num_blocks}")
        if self.source.size < self.num_blocks * self.cfg.block_size:
            raise exceptions.ShapeMismatch(
                f"Source has {self.source.size} samples, {self.num_blocks} blocks of "
                f"{self.cfg.block_size} need {self.num_blocks * self.cfg.block_size}"
            )
        if len(self.true_feedback_paths) != len(self.synth_filters):
            raise exceptions.ChannelCountMismatch(
                f"{len(self.true_feedback_paths)} feedback paths for "
                f"{len(self.synth_filters)} loudspeakers"
            )

    @classmethod
    def random(
        cls,
        cfg: EngineConfig,
        num_blocks: int,
        synth_length: int,
        feedback_length: int,
        seed: int = 0,
        feedback_gain: float = 0.5,
        cancel: bool = True,
    ) -> "ClosedLoopScenario":
        """Scenario with a standard-normal source and scaled random filters; F^ = F when
        `cancel` is set, F^ = 0 otherwise.

        Args:
            cfg (EngineConfig): Engine configuration (C_in = 1).
            num_blocks (int): Blocks to simulate.
            synth_length (int): n_h_aur.
            feedback_length (int): n_h_f (and n_h_fc).
            seed (int, optional): Random seed. Defaults to 0.
            feedback_gain (float, optional): Scale of the feedback paths. Defaults to 0.5.
            cancel (bool, optional): Hand the true paths to the auralizer. Defaults to True.

        Returns:
            ClosedLoopScenario: The scenario.
        """
        rng = np.random.default_rng(seed)
        channels = cfg.output_channels
        paths = scaled_random_filters(rng, channels, feedback_length, feedback_gain)
        return cls(
            source=rng.standard_normal(num_blocks * cfg.block_size),
            true_feedback_paths=paths,
            fc_filters=paths if cancel else np.zeros_like(paths),
            synth_filters=scaled_random_filters(rng, channels, synth_length),
            cfg=cfg,
            num_blocks=num_blocks,
        )


@dataclass(frozen=True)
class ClosedLoopResult:
    """Per-block record of a closed-loop run.

    Attributes:
        mic_blocks (np.ndarray): Microphone input m_n (source plus physical feedback),
            shape `(num_blocks, n_x)`.
        conditioned_blocks (np.ndarray): m~_n after gain and cancellation, `(num_blocks, n_x)`.
        speaker_blocks (np.ndarray): Loudspeaker output l_n, `(num_blocks, C_out, n_x)`.
        residual_blocks (np.ndarray): m~_n - g * source_n, `(num_blocks, n_x)`.
    """

    mic_blocks: np.ndarray
    conditioned_blocks: np.ndarray
    speaker_blocks: np.ndarray
    residual_blocks: np.ndarray

    def block_energy(self, which: str = "conditioned") -> np.ndarray:
        """Sum of squares per block of `mic_blocks` ("mic") or `conditioned_blocks`."""
        blocks = self.mic_blocks if which == "mic" else self.conditioned_blocks
        return np.sum(np.square(blocks, dtype=np.float64), axis=1)


def simulate_closed_loop(
    scn: ClosedLoopScenario, device: "str | Backend" = "reference"
) -> ClosedLoopResult:
    """Run an auralizer inside a simulated acoustic loop. Microphone block n is the source block
    plus sum_c (F_c * d_c) over that block, where d_c is loudspeaker channel c delayed by one
    block.

    Args:
        scn (ClosedLoopScenario): Scenario to run.
        device (str | Backend, optional): Backend of the auralizer under test. Defaults to
            "reference".

    Returns:
        ClosedLoopResult: Microphone, conditioned, loudspeaker and residual blocks.
    """
    aur = Auralizer(
        scn.synth_filters, scn.fc_filters, scn.cfg, input_gain=scn.input_gain, backend=device
    )
    n_x = scn.cfg.block_size
    channels, path_length = scn.true_feedback_paths.shape
    arrivals = np.zeros((scn.num_blocks + 1) * n_x + path_length, dtype=np.float64)
    mic = np.zeros((scn.num_blocks, n_x), dtype=np.float64)
    conditioned = np.zeros((scn.num_blocks, n_x), dtype=np.float64)
    speakers = np.zeros((scn.num_blocks, channels, n_x), dtype=np.float32)

    for n in range(scn.num_blocks):
        start, stop = n * n_x, (n + 1) * n_x
        mic[n] = scn.source[start:stop] + arrivals[start:stop]
        aur.auralize(mic[n], out=speakers[n])
        conditioned[n] = aur.last_conditioned
        # The response of l_n reaches the microphone from block n + 1 on.
        for channel in range(channels):
            response = direct_convolve(speakers[n, channel], scn.true_feedback_paths[channel])
            arrivals[stop : stop + response.size] += response

    residual = conditioned - scn.input_gain * scn.source[: scn.num_blocks * n_x].reshape(
        scn.num_blocks, n_x
    )
    logger.debug(
        "Closed loop: %s blocks, max |residual| = %.3g", scn.num_blocks, np.abs(residual).max()
    )
    return ClosedLoopResult(mic, conditioned, speakers, residual)


def open_loop_speakers(
    scn: ClosedLoopScenario, device: "str | Backend" = "reference"
) -> np.ndarray:
    """Loudspeaker blocks of a feedback-free run: the gained clean source through the synthesis
    filters only.

    Returns:
        np.ndarray: float32 array of shape `(num_blocks, C_out, n_x)`.
    """
    n_x = scn.cfg.block_size
    synth = Convolver(scn.synth_filters, scn.cfg, backend=device)
    source = scn.input_gain * scn.source[: scn.num_blocks * n_x]
    output = synth.convolve_signal(source)
    return output.reshape(len(scn.synth_filters), scn.num_blocks, n_x).transpose(1, 0, 2)


def residual_loop_fir(scn: ClosedLoopScenario) -> np.ndarray:
    """Open-loop impulse response left after cancellation:
    z^{-n_x} sum_c H_aur,c * (g F_c - F^_c).

    Returns:
        np.ndarray: float64 loop impulse response.
    """
    length = max(scn.true_feedback_paths.shape[1], scn.fc_filters.shape[1])
    true_paths = np.pad(
        scn.input_gain * scn.true_feedback_paths,
        ((0, 0), (0, length - scn.true_feedback_paths.shape[1])),
    )
    estimates = np.pad(scn.fc_filters, ((0, 0), (0, length - scn.fc_filters.shape[1])))
    loop = sum(
        direct_convolve(synth, path)
        for synth, path in zip(scn.synth_filters, true_paths - estimates)
    )
    return np.concatenate([np.zeros(scn.cfg.block_size), loop])


def max_stable_gain(
    loop_fir: Sequence[float] | np.ndarray, n_fft: int = 512
) -> tuple[float, float]:
    """Maximum stable gain (MSG) of a loop impulse response, in dB: the gain margin before the
    loop magnitude reaches 1 at a frequency where its phase is a multiple of 2 pi. A negative
    MSG means the loop as given is unstable.

    Args:
        loop_fir (Sequence[float] | np.ndarray): Loop impulse response.
        n_fft (int, optional): Minimum frequency grid size; raised to 8x the loop length so
            long loops keep their phase resolution. Defaults to 512.

    Raises:
        exceptions.LengthMismatch: When `n_fft` is odd.

    Returns:
        tuple[float, float]: (MSG in dB, normalized angular frequency in rad/sample), or
            (inf, nan) when no frequency qualifies.
    """
    if n_fft % 2:
        raise exceptions.LengthMismatch(f"n_fft should be even: {n_fft}")
    loop_fir = np.ravel(np.asarray(loop_fir, dtype=np.float64))
    if not np.any(loop_fir):
        return (np.inf, np.nan)
    n_fft = max(n_fft, 8 * loop_fir.size)

    w, loop_tf = signal.freqz(loop_fir, 1, worN=n_fft)
    loop_phase = np.unwrap(np.angle(loop_tf)) / (2 * np.pi)

    # Interpolate between the grid points that straddle a multiple of 2 pi.
    idx_lower = np.flatnonzero(np.diff(np.ceil(loop_phase)))
    idx_upper = idx_lower + 1
    phase_lower, phase_upper = loop_phase[idx_lower], loop_phase[idx_upper]
    phase_multiple = np.ceil(phase_upper)
    w_interp = w[idx_upper] - np.abs(phase_upper - phase_multiple) * (
        w[idx_upper] - w[idx_lower]
    ) / np.abs(phase_upper - phase_lower)
    if loop_tf[0].real > 0:
        w_interp = np.concatenate([[0.0], w_interp])
    if w_interp.size == 0:
        return (np.inf, np.nan)

    _, loop_tf_interp = signal.freqz(loop_fir, 1, worN=w_interp)
    magnitude = np.abs(loop_tf_interp)
    msg_idx = int(np.argmax(magnitude))
    if magnitude[msg_idx] == 0:
        return (np.inf, np.nan)
    return (float(-20 * np.log10(magnitude[msg_idx])), float(w_interp[msg_idx]))
