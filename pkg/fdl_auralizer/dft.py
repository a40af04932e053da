"""
Real-to-complex forward and complex-to-real inverse transforms of length n_f.

Transforms go through a `DftProvider`, so an execution backend can swap the transform engine
(NumPy's pocketfft on the host, `torch.fft` on an accelerator) while the convolution code stays
the same. The convention is fixed: the forward transform is unnormalized and the inverse applies
1/n_f, so a pointwise product of two spectra is the circular convolution of the two buffers.
"""

from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

from fdl_auralizer import exceptions
from fdl_auralizer.blocks import SpectrumBlock
from fdl_auralizer.config import is_power_of_two

MIN_DFT_SIZE = 32
# Relative to the largest bin magnitude.
EDGE_BIN_TOLERANCE = 1e-6


class DftProvider(Protocol):
    """Transform engine used by a `DftPlan`. Both methods operate along the last axis and write
    into `out` when it is given."""

    name: str

    def rfft(self, buffer: np.ndarray, out: np.ndarray | None = None) -> np.ndarray:
        """Unnormalized real-to-complex transform of the last axis."""

    def irfft(self, spectrum: np.ndarray, size: int, out: np.ndarray | None = None) -> np.ndarray:
        """Complex-to-real inverse of the last axis, scaled by 1/size."""


class NumpyDftProvider:
    """Host transforms through `numpy.fft`, which keeps float32 inputs in single precision and
    writes into caller-owned buffers."""

    name = "numpy"

    def rfft(self, buffer: np.ndarray, out: np.ndarray | None = None) -> np.ndarray:
        return np.fft.rfft(buffer, axis=-1, out=out)

    def irfft(self, spectrum: np.ndarray, size: int, out: np.ndarray | None = None) -> np.ndarray:
        return np.fft.irfft(spectrum, n=size, axis=-1, out=out)


@dataclass(frozen=True)
class DftPlan:
    """Immutable transform plan of one size. Scratch space belongs to the caller (through `out`
    arguments), so one plan may be shared by concurrent callers.

    Attributes:
        size (int): Transform length n_f; a power of two >= 32.
        provider (DftProvider): Transform engine. Defaults to `NumpyDftProvider`.
    """

    size: int
    provider: DftProvider = field(default_factory=NumpyDftProvider)

    def __post_init__(self):
        if not (is_power_of_two(self.size) and self.size >= MIN_DFT_SIZE):
            raise exceptions.LengthMismatch(
                f"Transform size must be a power of two >= {MIN_DFT_SIZE}: {self.size}"
            )

    @property
    def bin_count(self) -> int:
        """Number of bins of a real spectrum, n_f / 2 + 1."""
        return self.size // 2 + 1

    def forward(self, buffer: np.ndarray, out: np.ndarray | None = None) -> np.ndarray:
        """Batched forward transform along the last axis (no validation beyond the length).

        Args:
            buffer (np.ndarray): Real array whose last axis has length n_f.
            out (np.ndarray | None, optional): Complex destination of shape
                `buffer.shape[:-1] + (n_f / 2 + 1,)`. Defaults to None (allocate).

        Raises:
            exceptions.LengthMismatch: When the last axis is not n_f long.

        Returns:
            np.ndarray: The spectra (`out` when given).
        """
        if buffer.shape[-1] != self.size:
            raise exceptions.LengthMismatch(
                f"Expected a buffer of {self.size} samples, got {buffer.shape[-1]}"
            )
        return self.provider.rfft(buffer, out=out)

    def inverse(self, spectrum: np.ndarray, out: np.ndarray | None = None) -> np.ndarray:
        """Batched inverse transform along the last axis (no edge-bin validation).

        Args:
            spectrum (np.ndarray): Complex array whose last axis has n_f / 2 + 1 bins.
            out (np.ndarray | None, optional): Real destination with last axis n_f. Defaults
                to None (allocate).

        Raises:
            exceptions.LengthMismatch: When the last axis does not have n_f / 2 + 1 bins.

        Returns:
            np.ndarray: The time-domain buffers (`out` when given).
        """
        if spectrum.shape[-1] != self.bin_count:
            raise exceptions.LengthMismatch(
                f"Expected a spectrum of {self.bin_count} bins, got {spectrum.shape[-1]}"
            )
        return self.provider.irfft(spectrum, self.size, out=out)


def forward_real(plan: DftPlan, buffer: np.ndarray) -> SpectrumBlock:
    """Unnormalized real-to-complex transform of one buffer:
    bins[j] = sum_t buffer[t] * exp(-2 pi i j t / n_f) for j = 0 .. n_f / 2.

    The precision follows the input (float32 in, complex64 out; float64 in, complex128 out).

    Args:
        plan (DftPlan): Plan of size n_f.
        buffer (np.ndarray): One-dimensional real buffer of length n_f.

    Raises:
        exceptions.LengthMismatch: When the buffer is not one-dimensional of length n_f.
        exceptions.NonFiniteInput: When the buffer contains NaN or infinite values.

    Returns:
        SpectrumBlock: The n_f / 2 + 1 bins.
    """
    buffer = np.asarray(buffer)
    if buffer.ndim != 1 or buffer.shape[0] != plan.size:
        raise exceptions.LengthMismatch(
            f"Expected a one-dimensional buffer of {plan.size} samples, got shape {buffer.shape}"
        )
    if not np.issubdtype(buffer.dtype, np.floating):
        buffer = buffer.astype(np.float64)
    if not np.isfinite(buffer).all():
        raise exceptions.NonFiniteInput("Transform input contains NaN or infinite samples")
    return SpectrumBlock(plan.forward(buffer))


def inverse_real(plan: DftPlan, spectrum: SpectrumBlock | np.ndarray) -> np.ndarray:
    """Complex-to-real inverse transform with 1/n_f normalization, so that
    `inverse_real(plan, forward_real(plan, x))` reproduces `x`.

    Args:
        plan (DftPlan): Plan of size n_f.
        spectrum (SpectrumBlock | np.ndarray): n_f / 2 + 1 bins whose DC and Nyquist bins are
            real.

    Raises:
        exceptions.LengthMismatch: When the bin count is not n_f / 2 + 1.
        exceptions.NonRealEdgeBins: When the DC or Nyquist bin has a non-negligible imaginary
            part.

    Returns:
        np.ndarray: The n_f real samples.
    """
    bins = spectrum.bins if isinstance(spectrum, SpectrumBlock) else np.asarray(spectrum)
    if bins.ndim != 1 or bins.shape[0] != plan.bin_count:
        raise exceptions.LengthMismatch(
            f"Expected a spectrum of {plan.bin_count} bins, got shape {bins.shape}"
        )
    scale = max(1.0, float(np.abs(bins).max()))
    if max(abs(bins[0].imag), abs(bins[-1].imag)) > EDGE_BIN_TOLERANCE * scale:
        raise exceptions.NonRealEdgeBins(
            f"DC and Nyquist bins must be real: DC={bins[0]}, Nyquist={bins[-1]}"
        )
    return plan.inverse(bins)
