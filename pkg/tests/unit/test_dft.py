import numpy as np
import pytest

from fdl_auralizer import exceptions
from fdl_auralizer.blocks import SpectrumBlock
from fdl_auralizer.dft import DftPlan, forward_real, inverse_real


def naive_dft(buffer: np.ndarray) -> np.ndarray:
    n = buffer.shape[0]
    t = np.arange(n)
    j = np.arange(n // 2 + 1)[:, np.newaxis]
    return np.sum(buffer * np.exp(-2j * np.pi * j * t / n), axis=1)


@pytest.fixture
def plan() -> DftPlan:
    return DftPlan(256)


def test_dft__plan_sizes() -> None:
    assert DftPlan(32).bin_count == 17
    assert DftPlan(256).bin_count == 129
    for size in (16, 100, 0):
        with pytest.raises(exceptions.LengthMismatch):
            DftPlan(size)


def test_forward_real__zero_and_impulse(plan: DftPlan) -> None:
    zero = forward_real(plan, np.zeros(256))
    assert isinstance(zero, SpectrumBlock)
    assert zero.bin_count == 129 and zero.fft_size == 256
    assert not np.any(zero.bins)

    impulse = np.zeros(256)
    impulse[0] = 1.0
    np.testing.assert_array_equal(forward_real(plan, impulse).bins, np.ones(129))


def test_forward_real__matches_naive_dft(plan: DftPlan, rng: np.random.Generator) -> None:
    buffer = rng.standard_normal(256)
    bins = forward_real(plan, buffer).bins
    np.testing.assert_allclose(bins, naive_dft(buffer), rtol=0, atol=1e-5)
    assert bins[0].imag == pytest.approx(0, abs=1e-9)
    assert bins[-1].imag == pytest.approx(0, abs=1e-9)


def test_forward_real__precision_follows_input(plan: DftPlan) -> None:
    assert forward_real(plan, np.zeros(256, dtype=np.float32)).bins.dtype == np.complex64
    assert forward_real(plan, np.zeros(256)).bins.dtype == np.complex128
    assert forward_real(plan, np.zeros(256, dtype=np.int32)).bins.dtype == np.complex128


@pytest.mark.parametrize(
    "buffer",
    [
        pytest.param(np.zeros(128), id="short"),
        pytest.param(np.zeros(512), id="long"),
        pytest.param(np.zeros((2, 256)), id="two-dimensional"),
    ],
)
def test_forward_real__length_mismatch(plan: DftPlan, buffer: np.ndarray) -> None:
    with pytest.raises(exceptions.LengthMismatch):
        forward_real(plan, buffer)


def test_forward_real__non_finite(plan: DftPlan) -> None:
    buffer = np.zeros(256)
    buffer[3] = np.nan
    with pytest.raises(exceptions.NonFiniteInput):
        forward_real(plan, buffer)


def test_forward_real__linearity(plan: DftPlan, rng: np.random.Generator) -> None:
    x, y = rng.standard_normal((2, 256))
    combined = forward_real(plan, 2.5 * x - 0.5 * y).bins
    separate = 2.5 * forward_real(plan, x).bins - 0.5 * forward_real(plan, y).bins
    np.testing.assert_allclose(combined, separate, rtol=0, atol=1e-5)


def test_forward_real__parseval(plan: DftPlan, rng: np.random.Generator) -> None:
    x = rng.standard_normal(256)
    bins = forward_real(plan, x).bins
    spectral = (
        np.abs(bins[0]) ** 2 + np.abs(bins[-1]) ** 2 + 2 * np.sum(np.abs(bins[1:-1]) ** 2)
    ) / 256
    assert spectral == pytest.approx(np.sum(x**2), rel=1e-4)


def test_inverse_real__zero_and_ones(plan: DftPlan) -> None:
    assert not np.any(inverse_real(plan, np.zeros(129, dtype=np.complex128)))

    impulse = inverse_real(plan, SpectrumBlock(np.ones(129, dtype=np.complex128)))
    expected = np.zeros(256)
    expected[0] = 1.0
    np.testing.assert_allclose(impulse, expected, rtol=0, atol=1e-12)


def test_inverse_real__round_trip(plan: DftPlan, rng: np.random.Generator) -> None:
    x = rng.standard_normal(256)
    np.testing.assert_allclose(inverse_real(plan, forward_real(plan, x)), x, rtol=0, atol=1e-6)


def test_inverse_real__errors(plan: DftPlan) -> None:
    with pytest.raises(exceptions.LengthMismatch):
        inverse_real(plan, np.zeros(128, dtype=np.complex128))

    bins = np.ones(129, dtype=np.complex128)
    bins[0] = 1 + 0.5j
    with pytest.raises(exceptions.NonRealEdgeBins):
        inverse_real(plan, bins)
    bins[0] = 1
    bins[-1] = 1 - 0.5j
    with pytest.raises(exceptions.NonRealEdgeBins):
        inverse_real(plan, bins)


def test_dft__batched_into_caller_buffers(plan: DftPlan, rng: np.random.Generator) -> None:
    buffers = rng.standard_normal((3, 256)).astype(np.float32)
    spectra = np.empty((3, 129), dtype=np.complex64)
    assert plan.forward(buffers, out=spectra) is spectra
    restored = np.empty((3, 256), dtype=np.float32)
    assert plan.inverse(spectra, out=restored) is restored
    np.testing.assert_allclose(restored, buffers, rtol=0, atol=1e-5)
