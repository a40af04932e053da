from typing import Callable

import numpy as np
import pytest

from fdl_auralizer import exceptions
from fdl_auralizer.auralizer import Auralizer, create_auralizer
from fdl_auralizer.config import EngineConfig
from fdl_auralizer.convolver import Convolver


def composed_reference(synth_filters, fc_filters, cfg, blocks, input_gain=1.0) -> np.ndarray:
    """Stage-by-stage model of the loop built from two independent convolvers."""
    synth = Convolver(synth_filters, cfg)
    fc = Convolver(fc_filters, cfg.with_channels(cfg.output_channels, cfg.output_channels))
    estimate = np.zeros(cfg.block_size)
    outputs = []
    for block in blocks:
        speakers = synth.convolve(input_gain * block - estimate)
        estimate = fc.convolve(speakers).sum(axis=0)
        outputs.append(speakers)
    return np.stack(outputs)


def test_create_auralizer__partition_counts() -> None:
    cfg = EngineConfig.for_block_size(128)
    aur = create_auralizer(np.zeros((1, 480000)), np.zeros((1, 48000)), cfg)
    assert aur.synth_partitions == 3750
    assert aur.fc_partitions == 375
    assert aur.synth.backend is aur.fc.backend


def test_create_auralizer__channel_count_mismatch() -> None:
    cfg = EngineConfig.for_block_size(64, output_channels=32)
    with pytest.raises(exceptions.ChannelCountMismatch):
        Auralizer(np.zeros((32, 100)), np.zeros((16, 50)), cfg)
    with pytest.raises(exceptions.ChannelCountMismatch):
        Auralizer(np.zeros((16, 100)), np.zeros((16, 50)), cfg)


def test_create_auralizer__needs_one_microphone() -> None:
    cfg = EngineConfig.for_block_size(64, input_channels=4, output_channels=4)
    with pytest.raises(exceptions.ModeChannelMismatch):
        Auralizer(np.zeros((4, 100)), np.zeros((4, 50)), cfg)


def test_auralize__zero_cancellation_filters_match_synthesis(
    rng: np.random.Generator, scaled_filters: Callable
) -> None:
    cfg = EngineConfig.for_block_size(32, output_channels=3)
    synth_filters = scaled_filters(3, 200)
    aur = Auralizer(synth_filters, np.zeros((3, 90)), cfg)
    synth = Convolver(synth_filters, cfg)
    for block in rng.standard_normal((8, 32)):
        np.testing.assert_array_equal(aur.auralize(block), synth.convolve(block))
        assert not np.any(aur.feedback_estimate)


def test_auralize__first_estimate_is_zero(
    rng: np.random.Generator, scaled_filters: Callable
) -> None:
    cfg = EngineConfig.for_block_size(16, output_channels=2)
    aur = Auralizer(scaled_filters(2, 40), scaled_filters(2, 40), cfg, input_gain=0.5)
    assert not np.any(aur.feedback_estimate)
    block = rng.standard_normal(16)
    aur.auralize(block)
    np.testing.assert_allclose(aur.last_conditioned, 0.5 * block, rtol=0, atol=1e-6)
    assert np.any(aur.feedback_estimate)
    assert aur.feedback_estimate.shape == (16,)


@pytest.mark.parametrize("input_gain", [1.0, 0.25])
def test_auralize__matches_composed_convolvers(
    input_gain: float, rng: np.random.Generator, scaled_filters: Callable
) -> None:
    cfg = EngineConfig.for_block_size(32, output_channels=4)
    synth_filters = scaled_filters(4, 150)
    fc_filters = 0.1 * scaled_filters(4, 70)
    blocks = rng.standard_normal((20, 32))
    expected = composed_reference(synth_filters, fc_filters, cfg, blocks, input_gain)

    aur = Auralizer(synth_filters, fc_filters, cfg, input_gain=input_gain)
    for n, block in enumerate(blocks):
        assert np.abs(aur.auralize(block) - expected[n]).max() < 1e-5


def test_auralize__causal(rng: np.random.Generator, scaled_filters: Callable) -> None:
    cfg = EngineConfig.for_block_size(16, output_channels=2)
    synth_filters, fc_filters = scaled_filters(2, 60), scaled_filters(2, 60)
    blocks = rng.standard_normal((10, 16))
    altered = blocks.copy()
    altered[6:] = rng.standard_normal((4, 16))

    first = Auralizer(synth_filters, fc_filters, cfg).auralize_signal(blocks.ravel())
    second = Auralizer(synth_filters, fc_filters, cfg).auralize_signal(altered.ravel())
    np.testing.assert_array_equal(first[:, : 6 * 16], second[:, : 6 * 16])
    assert not np.array_equal(first[:, 6 * 16 :], second[:, 6 * 16 :])


def test_auralize__into_caller_buffer(rng: np.random.Generator) -> None:
    cfg = EngineConfig.for_block_size(16, output_channels=2)
    aur = Auralizer(np.ones((2, 3)), np.zeros((2, 3)), cfg)
    out = np.empty((2, 16), dtype=np.float32)
    assert aur.auralize(rng.standard_normal((1, 16)), out=out) is out


def test_auralize__errors() -> None:
    cfg = EngineConfig.for_block_size(16, output_channels=2)
    aur = Auralizer(np.ones((2, 3)), np.zeros((2, 3)), cfg)
    with pytest.raises(exceptions.ShapeMismatch):
        aur.auralize(np.zeros((2, 16)))
    with pytest.raises(exceptions.ShapeMismatch):
        aur.auralize(np.zeros(8))
    with pytest.raises(exceptions.NonFiniteInput):
        aur.auralize(np.full(16, np.inf))


def test_reset__matches_fresh_auralizer(
    rng: np.random.Generator, scaled_filters: Callable
) -> None:
    cfg = EngineConfig.for_block_size(16, output_channels=2)
    synth_filters, fc_filters = scaled_filters(2, 50), scaled_filters(2, 30)
    aur = Auralizer(synth_filters, fc_filters, cfg)
    aur.auralize_signal(rng.standard_normal(100))
    aur.reset()
    assert not np.any(aur.feedback_estimate)
    assert not np.any(aur.last_conditioned)

    signal = rng.standard_normal(64)
    np.testing.assert_array_equal(
        aur.auralize_signal(signal),
        Auralizer(synth_filters, fc_filters, cfg).auralize_signal(signal),
    )
    aur.reset()
    assert not np.any(aur.auralize(np.zeros(16)))


@pytest.mark.parametrize("backend", ["parallel"])
def test_auralize__parallel_matches_reference(
    backend: str, rng: np.random.Generator, scaled_filters: Callable
) -> None:
    cfg = EngineConfig.for_block_size(32, output_channels=3)
    synth_filters, fc_filters = scaled_filters(3, 300), 0.2 * scaled_filters(3, 100)
    signal = rng.standard_normal(25 * 32)
    reference = Auralizer(synth_filters, fc_filters, cfg).auralize_signal(signal)
    other = Auralizer(synth_filters, fc_filters, cfg, backend=backend).auralize_signal(signal)
    assert np.abs(other - reference).max() < 1e-4


def test_auralize__accelerator_matches_reference(
    accelerator: str, rng: np.random.Generator, scaled_filters: Callable
) -> None:
    cfg = EngineConfig.for_block_size(32, output_channels=3)
    synth_filters, fc_filters = scaled_filters(3, 300), 0.2 * scaled_filters(3, 100)
    signal = rng.standard_normal(25 * 32)
    reference = Auralizer(synth_filters, fc_filters, cfg).auralize_signal(signal)
    device = Auralizer(synth_filters, fc_filters, cfg, backend=accelerator)
    assert np.abs(device.auralize_signal(signal) - reference).max() < 1e-4


def test_auralize__torch_kernels_on_cpu(
    torch_cpu_backend, rng: np.random.Generator, scaled_filters: Callable
) -> None:
    cfg = EngineConfig.for_block_size(32, output_channels=2)
    synth_filters, fc_filters = scaled_filters(2, 300), 0.2 * scaled_filters(2, 100)
    signal = rng.standard_normal(25 * 32)
    reference = Auralizer(synth_filters, fc_filters, cfg).auralize_signal(signal)
    aur = Auralizer(synth_filters, fc_filters, cfg, input_gain=1.0, backend=torch_cpu_backend)
    assert np.abs(aur.auralize_signal(signal) - reference).max() < 1e-4

    aur.reset()
    assert not np.any(aur.feedback_estimate)
    assert np.abs(aur.auralize_signal(signal) - reference).max() < 1e-4
