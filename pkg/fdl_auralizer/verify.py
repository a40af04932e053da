"""
Verification suites run by `fdl-auralizer verify`: streamed engine output against the float64
oracle, closed-loop cancellation and instability checks, and backend equivalence.

The small grid is quick enough for every build; the full grid adds n_x = 128, n_h = 10 n_x,
three seeds, and one filter of 10 s at 48 kHz.
"""

import itertools
from dataclasses import dataclass
from typing import Literal

import numpy as np

from fdl_auralizer import exceptions
from fdl_auralizer.backends import Backend, get_backend
from fdl_auralizer.blocks import SAMPLE_DTYPE, Mode
from fdl_auralizer.config import EngineConfig, partition_count
from fdl_auralizer.convolver import Convolver
from fdl_auralizer.logging import backend_logger
from fdl_auralizer.oracle import (
    ClosedLoopScenario,
    direct_convolve,
    max_stable_gain,
    open_loop_speakers,
    residual_loop_fir,
    scaled_random_filters,
    simulate_closed_loop,
)

Grid = Literal["small", "full"]

ORACLE_TOLERANCE = 1e-4
LONG_FILTER_TOLERANCE = 1e-3
PROFILE_TOLERANCE = 1e-3
LOOP_AMPLITUDE = 1.2
EXTRA_BLOCKS = 3


@dataclass(frozen=True)
class VerificationCase:
    """Outcome of one check.

    Attributes:
        name (str): Case label, including its parameters.
        passed (bool): Whether the check held.
        detail (str): Measured error or margin.
    """

    name: str
    passed: bool
    detail: str = ""


def grid_points(grid: Grid) -> list[tuple[int, int, int, Mode, int]]:
    """`(n_x, n_h, C_out, mode, seed)` points of the oracle grid."""
    block_sizes = (16, 64) if grid == "small" else (16, 64, 128)
    seeds = (0,) if grid == "small" else (0, 1, 2)
    points = []
    for n_x in block_sizes:
        lengths = [1, n_x - 1, n_x, n_x + 1, 3 * n_x + 7]
        if grid == "full":
            lengths.append(10 * n_x)
        for n_h, channels, mode, seed in itertools.product(
            lengths, (1, 4), (Mode.BROADCAST, Mode.ELEMENTWISE), seeds
        ):
            points.append((n_x, n_h, channels, mode, seed))
    return points


def _streamed(
    filters: np.ndarray,
    cfg: EngineConfig,
    mode: Mode,
    signal: np.ndarray,
    device: "str | Backend",
) -> np.ndarray:
    return Convolver(filters, cfg, mode, backend=device).convolve_signal(signal)


def oracle_case(
    n_x: int,
    n_h: int,
    channels: int,
    mode: Mode,
    seed: int,
    device: "str | Backend" = "reference",
) -> list[VerificationCase]:
    """Stream K + 3 random blocks through a convolver and compare each output channel with the
    oracle's prefix. On a backend other than the reference, also compare against the reference
    backend.

    Returns:
        list[VerificationCase]: The oracle case, plus the backend case when applicable.
    """
    rng = np.random.default_rng(seed)
    input_channels = 1 if mode is Mode.BROADCAST else channels
    cfg = EngineConfig.for_block_size(
        n_x, input_channels=input_channels, output_channels=channels
    )
    filters = scaled_random_filters(rng, channels, n_h)
    num_blocks = partition_count(n_h, n_x) + EXTRA_BLOCKS
    samples = num_blocks * n_x
    signal = rng.standard_normal((input_channels, samples)).astype(SAMPLE_DTYPE)

    output = _streamed(filters, cfg, mode, signal, device)
    expected = np.stack(
        [
            direct_convolve(signal[0 if mode is Mode.BROADCAST else c], filters[c])[:samples]
            for c in range(channels)
        ]
    )
    label = f"n_x={n_x} n_h={n_h} C_out={channels} {mode.value} seed={seed}"
    error = float(np.abs(output - expected).max())
    cases = [
        VerificationCase(
            f"oracle {label}",
            error < ORACLE_TOLERANCE,
            f"max err {error:.2e} over {num_blocks} blocks",
        )
    ]
    backend = get_backend(device)
    if backend.name != "reference":
        reference = _streamed(filters, cfg, mode, signal, "reference")
        diff = float(np.abs(output - reference).max())
        cases.append(
            VerificationCase(
                f"backend {backend.name} {label}", diff < ORACLE_TOLERANCE, f"max diff {diff:.2e}"
            )
        )
    return cases


def long_filter_case(
    device: str = "reference",
    filter_length: int = 480000,
    channels: int = 2,
    num_blocks: int = 32,
    block_size: int = 128,
) -> VerificationCase:
    """A 10 s filter at 48 kHz over `num_blocks` blocks. Only the first `num_blocks * n_x` taps
    can reach the compared prefix, so the oracle convolves with that part of the filter.
    """
    rng = np.random.default_rng(0)
    cfg = EngineConfig.for_block_size(block_size, output_channels=channels)
    filters = scaled_random_filters(rng, channels, filter_length)
    samples = num_blocks * block_size
    signal = rng.standard_normal(samples).astype(SAMPLE_DTYPE)

    output = _streamed(filters, cfg, Mode.BROADCAST, signal, device)
    expected = np.stack(
        [direct_convolve(signal, filters[c, :samples])[:samples] for c in range(channels)]
    )
    error = float(np.abs(output - expected).max())
    partitions = partition_count(filter_length, block_size)
    return VerificationCase(
        f"long filter n_h={filter_length} C_out={channels} K={partitions}",
        error < LONG_FILTER_TOLERANCE,
        f"max err {error:.2e}",
    )


def perfect_cancellation_case(device: str = "reference") -> VerificationCase:
    """F^ = F with a 0.5 s feedback path over 50 blocks: the conditioned input must equal the
    source and the loudspeakers must play what a feedback-free run plays.
    """
    cfg = EngineConfig.for_block_size(128, output_channels=2)
    scn = ClosedLoopScenario.random(
        cfg, num_blocks=50, synth_length=1024, feedback_length=24000, seed=0
    )
    result = simulate_closed_loop(scn, device)
    residual = float(np.abs(result.residual_blocks).max())
    speaker_diff = float(np.abs(result.speaker_blocks - open_loop_speakers(scn, device)).max())
    return VerificationCase(
        "closed loop perfect cancellation",
        residual < ORACLE_TOLERANCE and speaker_diff < ORACLE_TOLERANCE,
        f"max residual {residual:.2e}, max speaker diff {speaker_diff:.2e}",
    )


def tone_scenario(cancel: bool, num_blocks: int = 14, block_size: int = 128) -> ClosedLoopScenario:
    """One loudspeaker, unit synthesis filter, and a single feedback tap of amplitude 1.2. The
    source tone repeats every block, so an uncompensated loop grows geometrically.
    """
    cfg = EngineConfig.for_block_size(block_size)
    t = np.arange(num_blocks * block_size)
    paths = np.array([[LOOP_AMPLITUDE]])
    return ClosedLoopScenario(
        source=np.sin(2 * np.pi * 4 * t / block_size),
        true_feedback_paths=paths,
        fc_filters=paths if cancel else np.zeros_like(paths),
        synth_filters=np.ones((1, 1)),
        cfg=cfg,
        num_blocks=num_blocks,
    )


def instability_cases(device: str = "reference") -> list[VerificationCase]:
    """Uncompensated loop of amplitude 1.2 against its compensated twin: the microphone energy
    must rise strictly over blocks 3 to 12 without cancellation and follow the clean profile
    with it. The loop margins are reported alongside.
    """
    unstable = tone_scenario(cancel=False)
    energy = simulate_closed_loop(unstable, device).block_energy("mic")[3:13]
    rising = bool(np.all(np.diff(energy) > 0))

    compensated = tone_scenario(cancel=True)
    conditioned = simulate_closed_loop(compensated, device).block_energy("conditioned")
    n_x = compensated.cfg.block_size
    clean = np.sum(np.square(compensated.source.reshape(-1, n_x)), axis=1)
    deviation = float(np.max(np.abs(conditioned - clean) / clean))

    msg_open, omega = max_stable_gain(residual_loop_fir(unstable))
    msg_closed, _ = max_stable_gain(residual_loop_fir(compensated))
    return [
        VerificationCase(
            "closed loop instability without cancellation",
            rising,
            f"energy {energy[0]:.3g} -> {energy[-1]:.3g}",
        ),
        VerificationCase(
            "closed loop clean profile with cancellation",
            deviation < PROFILE_TOLERANCE,
            f"max relative deviation {deviation:.2e}",
        ),
        VerificationCase(
            "loop margin",
            msg_open < 0 and msg_closed == np.inf,
            f"uncompensated MSG {msg_open:.3f} dB at {omega:.3f} rad, compensated {msg_closed} dB",
        ),
    ]


def run_verification(grid: Grid = "small", device: str = "reference") -> list[VerificationCase]:
    """Run every suite of a grid on one backend.

    Args:
        grid (Grid, optional): "small" or "full". Defaults to "small".
        device (str, optional): Backend name. Defaults to "reference".

    Raises:
        exceptions.BackendUnavailable: When the backend is not available here.

    Returns:
        list[VerificationCase]: Every case, in execution order.
    """
    log = backend_logger(get_backend(device).name)
    cases: list[VerificationCase] = []
    for point in grid_points(grid):
        cases.extend(oracle_case(*point, device=device))
    if grid == "full":
        cases.append(long_filter_case(device))
    cases.append(perfect_cancellation_case(device))
    cases.extend(instability_cases(device))

    for case in cases:
        if case.passed:
            log.debug("PASS %s (%s)", case.name, case.detail)
        else:
            log.error("FAIL %s (%s)", case.name, case.detail)
    failed = sum(not case.passed for case in cases)
    log.info("Verification: %s of %s cases failed", failed, len(cases))
    return cases


def all_passed(cases: list[VerificationCase]) -> bool:
    """Whether every case passed (and there was at least one)."""
    if not cases:
        raise exceptions.EmptyInput("No verification cases were run")
    return all(case.passed for case in cases)
