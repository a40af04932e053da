import numpy as np
import pytest

from fdl_auralizer import exceptions
from fdl_auralizer.config import EngineConfig
from fdl_auralizer.oracle import (
    ClosedLoopScenario,
    direct_convolve,
    max_stable_gain,
    open_loop_speakers,
    residual_loop_fir,
    scaled_random_filters,
    simulate_closed_loop,
)


def test_direct_convolve__example() -> None:
    result = direct_convolve([1, 2, 3], [1, 1])
    assert result.dtype == np.float64
    np.testing.assert_array_equal(result, [1, 3, 5, 3])


def test_direct_convolve__commutative_and_shift(rng: np.random.Generator) -> None:
    x, h = rng.standard_normal(50), rng.standard_normal(13)
    np.testing.assert_allclose(direct_convolve(x, h), direct_convolve(h, x), rtol=0, atol=1e-12)

    delay = np.zeros(8)
    delay[7] = 1.0
    shifted = direct_convolve(x, delay)
    assert shifted.size == 57
    np.testing.assert_array_equal(shifted[7:], x)
    assert not np.any(shifted[:7])


def test_direct_convolve__empty() -> None:
    with pytest.raises(exceptions.EmptyInput):
        direct_convolve([], [1.0])
    with pytest.raises(exceptions.EmptyInput):
        direct_convolve([1.0], np.zeros(0))


def test_scaled_random_filters(rng: np.random.Generator) -> None:
    filters = scaled_random_filters(rng, 3, 10000, gain=0.5)
    assert filters.shape == (3, 10000)
    assert np.sum(filters**2, axis=1) == pytest.approx([0.25] * 3, rel=0.1)


def test_scenario__validation() -> None:
    cfg = EngineConfig.for_block_size(16, output_channels=2)
    paths = np.zeros((2, 10))
    with pytest.raises(exceptions.ZeroLength):
        ClosedLoopScenario(np.zeros(64), paths, paths, paths, cfg, num_blocks=0)
    with pytest.raises(exceptions.ShapeMismatch):
        ClosedLoopScenario(np.zeros(63), paths, paths, paths, cfg, num_blocks=4)
    with pytest.raises(exceptions.ChannelCountMismatch):
        ClosedLoopScenario(np.zeros(64), np.zeros((3, 10)), paths, paths, cfg, num_blocks=4)


def test_simulate_closed_loop__silent_source() -> None:
    cfg = EngineConfig.for_block_size(16, output_channels=2)
    scn = ClosedLoopScenario.random(cfg, 6, synth_length=40, feedback_length=30, cancel=False)
    scn.source[:] = 0
    result = simulate_closed_loop(scn)
    for blocks in (
        result.mic_blocks,
        result.conditioned_blocks,
        result.speaker_blocks,
        result.residual_blocks,
    ):
        assert not np.any(blocks)


def test_simulate_closed_loop__no_feedback_matches_open_loop() -> None:
    cfg = EngineConfig.for_block_size(32, output_channels=3)
    scn = ClosedLoopScenario.random(cfg, 10, synth_length=100, feedback_length=50, cancel=False)
    scn.true_feedback_paths[:] = 0
    result = simulate_closed_loop(scn)
    assert result.speaker_blocks.shape == (10, 3, 32)
    assert np.abs(result.residual_blocks).max() < 1e-6
    np.testing.assert_allclose(result.speaker_blocks, open_loop_speakers(scn), rtol=0, atol=1e-6)


@pytest.mark.parametrize("input_gain", [1.0, 0.5])
def test_simulate_closed_loop__perfect_cancellation(input_gain: float) -> None:
    cfg = EngineConfig.for_block_size(64, output_channels=2)
    scn = ClosedLoopScenario.random(cfg, 30, synth_length=256, feedback_length=500)
    scn.input_gain = input_gain
    scn.fc_filters = input_gain * scn.true_feedback_paths
    result = simulate_closed_loop(scn)
    assert np.abs(result.residual_blocks).max() < 1e-4
    assert np.abs(result.speaker_blocks - open_loop_speakers(scn)).max() < 1e-4
    assert np.abs(result.mic_blocks - scn.source.reshape(30, 64)).max() > 1e-2


def test_simulate_closed_loop__uncompensated_loop_grows() -> None:
    cfg = EngineConfig.for_block_size(32)
    t = np.arange(12 * 32)
    paths = np.array([[1.5]])
    scn = ClosedLoopScenario(
        source=np.sin(2 * np.pi * 2 * t / 32),
        true_feedback_paths=paths,
        fc_filters=np.zeros_like(paths),
        synth_filters=np.ones((1, 1)),
        cfg=cfg,
        num_blocks=12,
    )
    energy = simulate_closed_loop(scn).block_energy("mic")
    assert np.all(np.diff(energy[2:]) > 0)
    assert energy[-1] > 100 * energy[0]
    np.testing.assert_allclose(simulate_closed_loop(scn).block_energy(), energy, rtol=1e-5)


def test_residual_loop_fir() -> None:
    cfg = EngineConfig.for_block_size(16)
    scn = ClosedLoopScenario(
        source=np.zeros(16),
        true_feedback_paths=[[0.0, 2.0]],
        fc_filters=[[0.0, 0.5, 0.25]],
        synth_filters=[[1.0, 1.0]],
        cfg=cfg,
        num_blocks=1,
        input_gain=0.5,
    )
    loop = residual_loop_fir(scn)
    # 0.5 * [0, 2, 0] - [0, 0.5, 0.25] = [0, 0.5, -0.25], then * [1, 1].
    np.testing.assert_allclose(loop, np.concatenate([np.zeros(16), [0, 0.5, 0.25, -0.25]]))


def test_max_stable_gain__delayed_tap() -> None:
    loop = np.zeros(129)
    loop[128] = 1.2
    msg, omega = max_stable_gain(loop)
    assert msg == pytest.approx(-20 * np.log10(1.2), abs=1e-6)
    assert msg == pytest.approx(-1.584, abs=1e-3)
    assert 0 <= omega <= np.pi


def test_max_stable_gain__stable_and_silent_loops() -> None:
    loop = np.zeros(17)
    loop[16] = 0.5
    msg, _ = max_stable_gain(loop)
    assert msg == pytest.approx(20 * np.log10(2), abs=1e-6)

    msg, omega = max_stable_gain(np.zeros(40))
    assert msg == np.inf and np.isnan(omega)


def test_max_stable_gain__odd_grid() -> None:
    with pytest.raises(exceptions.LengthMismatch):
        max_stable_gain([0.0, 1.0], n_fft=511)
