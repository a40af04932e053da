from pathlib import Path
from typing import Callable

import numpy as np
import pytest

from fdl_auralizer.backends import list_backends
from fdl_auralizer.config import EngineConfig


def available_backends() -> list[str]:
    return [descriptor.name for descriptor in list_backends()]


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(0)


@pytest.fixture
def scaled_filters(rng: np.random.Generator) -> Callable[[int, int], np.ndarray]:
    """Standard-normal filters scaled by 1/sqrt(n_h)."""

    def make(count: int, length: int) -> np.ndarray:
        return rng.standard_normal((count, length)) / np.sqrt(length)

    return make


@pytest.fixture
def cfg_128() -> EngineConfig:
    return EngineConfig.for_block_size(128)


@pytest.fixture
def accelerator() -> str:
    if "accelerator" not in available_backends():
        pytest.skip("No accelerator backend on this machine")
    return "accelerator"


@pytest.fixture
def wav_filters_path(tmp_path: Path, rng: np.random.Generator) -> Path:
    """Two filters of 480 samples @ 48 kHz as a 32-bit float WAV."""
    from fdl_auralizer.audio_io import write_filters

    path = tmp_path / "filters.wav"
    write_filters(path, rng.standard_normal((2, 480)).astype(np.float32), 48000)
    return path


@pytest.fixture
def raw_filters_path(tmp_path: Path, rng: np.random.Generator) -> Path:
    """Four filters of 128 samples @ 48 kHz as raw f32le with a YAML sidecar."""
    from fdl_auralizer.audio_io import write_filters

    path = tmp_path / "filters.f32"
    write_filters(path, rng.standard_normal((4, 128)).astype(np.float32), 48000)
    return path


@pytest.fixture
def impulse_wav_path(tmp_path: Path) -> Path:
    """Mono 32-bit float WAV of 1000 samples @ 48 kHz holding a unit impulse at t=0."""
    from fdl_auralizer.audio_io import write_signal

    path = tmp_path / "impulse.wav"
    signal = np.zeros(1000, dtype=np.float32)
    signal[0] = 1.0
    write_signal(path, signal, 48000)
    return path


@pytest.fixture
def torch_cpu_backend():
    """The PyTorch backend on the host CPU, so its kernels run without a CUDA device."""
    pytest.importorskip("torch")
    from fdl_auralizer.backends import AcceleratorBackend, BackendDescriptor

    descriptor = BackendDescriptor("accelerator", "accelerator", True, "cpu")
    return AcceleratorBackend(descriptor, device="cpu")
