"""
Execution backends for the hot kernels of partitioned convolution: input transforms, the FDL,
the spectral multiply-accumulate over K partitions and C_out channels, and output transforms.

Three backends exist:

- `reference`: serial NumPy on the host; always available and the numerical baseline.
- `parallel`: the same NumPy kernels split across a thread pool, by output channel first and
  then by partition range when there are fewer channels than workers.
- `accelerator`: PyTorch on a CUDA device; listed only when `torch` imports and a device is
  detected. Filter spectra, the FDL and every per-block buffer stay on the device; only the n_x
  sample blocks cross the host-device boundary.

A backend object is a stateless dispatcher and may be shared; per-stream state lives in the
`ConvolutionKernel` objects it creates, one per convolver.
"""

import functools
import os
from abc import ABC, abstractmethod
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Literal, Protocol

import numpy as np

from fdl_auralizer import exceptions
from fdl_auralizer.blocks import (
    SAMPLE_DTYPE,
    SPECTRUM_DTYPE,
    FrequencyDelayLine,
    Mode,
    PartitionedFilterSet,
)
from fdl_auralizer.config import EngineConfig
from fdl_auralizer.dft import DftPlan, NumpyDftProvider
from fdl_auralizer.logging import logger

try:
    import torch

    TORCH_AVAILABLE = True
except ImportError:
    torch = None
    TORCH_AVAILABLE = False

BackendKind = Literal["reference", "parallel", "accelerator"]
BACKEND_ALIASES = {"cpu": "parallel", "gpu": "accelerator"}


@dataclass(frozen=True)
class BackendDescriptor:
    """Description of one execution backend.

    Attributes:
        name (str): Name accepted by `get_backend` and the `--device` flag.
        kind (BackendKind): One of "reference", "parallel", "accelerator".
        available (bool): Whether the backend can run on this machine.
        detail (str): Worker count or device name, for display only.
    """

    name: str
    kind: BackendKind
    available: bool
    detail: str


class ConvolutionKernel(Protocol):
    """Per-convolver state and hot path of a backend. Arrays are backend-native (NumPy arrays
    on the host backends, device tensors on the accelerator)."""

    fdl: FrequencyDelayLine

    def process(self, block: Any) -> Any:
        """Run one `(C_in, n_x)` block through the pipeline; returns a `(C_out, n_x)` view of
        an internal buffer that the next call overwrites."""

    def reset(self) -> None:
        """Zero the sliding windows, the FDL and the accumulators."""


def accumulate_partitions(
    fdl_slots: np.ndarray, spectra: np.ndarray, mode: Mode, out: np.ndarray
) -> np.ndarray:
    """Spectral multiply-accumulate on the host:
    out[c, j] = sum_k fdl_slots[i, k, j] * spectra[c, k, j], with i = 0 in broadcast mode and
    i = c in elementwise mode.

    Args:
        fdl_slots (np.ndarray): FDL slots in logical order, shape `(C_in, K, bins)`.
        spectra (np.ndarray): Sub-filter spectra, shape `(C, K, bins)`.
        mode (Mode): Channel mapping.
        out (np.ndarray): Destination of shape `(C, bins)`.

    Returns:
        np.ndarray: `out`.
    """
    if mode is Mode.BROADCAST:
        return np.einsum("kb,ckb->cb", fdl_slots[0], spectra, out=out)
    return np.einsum("ckb,ckb->cb", fdl_slots, spectra, out=out)


def split_range(length: int, parts: int) -> list[tuple[int, int]]:
    """Split `range(length)` into at most `parts` contiguous, nearly equal, non-empty ranges."""
    parts = max(1, min(parts, length))
    bounds = np.linspace(0, length, parts + 1).round().astype(int)
    return [(int(lo), int(hi)) for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo]


@dataclass(frozen=True)
class MacTask:
    """Slice of the multiply-accumulate: output channels [c0, c1) over partitions [k0, k1),
    written to partial accumulator `part`."""

    c0: int
    c1: int
    k0: int
    k1: int
    part: int


class Backend(ABC):
    """Common interface of the execution backends."""

    descriptor: BackendDescriptor

    @property
    def name(self) -> str:
        """Backend name."""
        return self.descriptor.name

    @abstractmethod
    def create_kernel(
        self, filters: PartitionedFilterSet, cfg: EngineConfig, mode: Mode
    ) -> ConvolutionKernel:
        """Create the per-convolver state for a filter set (spectra moved into the backend's
        memory space once, here)."""

    @abstractmethod
    def spectral_mac(
        self, fdl: FrequencyDelayLine, filters: PartitionedFilterSet, mode: Mode
    ) -> np.ndarray:
        """Multiply-accumulate of host-resident FDL slots and filter spectra; host result."""

    @abstractmethod
    def asarray(self, block: np.ndarray) -> Any:
        """Move a host block into the backend's memory space."""

    @abstractmethod
    def to_host(self, array: Any, out: np.ndarray | None = None) -> np.ndarray:
        """Copy a backend-native array to the host (into `out` when given)."""

    @abstractmethod
    def zeros(self, shape: tuple[int, ...]) -> Any:
        """Zeroed float32 array in the backend's memory space."""

    @abstractmethod
    def condition(self, mic: Any, gain: float, estimate: Any, out: Any) -> Any:
        """out = gain * mic - estimate."""

    @abstractmethod
    def channel_sum(self, block: Any, out: Any) -> Any:
        """out = sum of the rows of `block`."""

    @property
    def transform_placement(self) -> str:
        """Where the forward/inverse transforms of this backend run ("host" or "device")."""
        return "host"


class HostKernel:
    """NumPy convolution kernel shared by the reference and parallel backends. Every buffer is
    allocated here, so `process` only writes into existing memory."""

    # pylint: disable=too-many-instance-attributes
    def __init__(
        self,
        filters: PartitionedFilterSet,
        cfg: EngineConfig,
        mode: Mode,
        backend: "HostBackend",
    ):
        self.mode = mode
        self.block_size = cfg.block_size
        self.plan = DftPlan(cfg.fft_size, NumpyDftProvider())
        self.spectra = filters.spectra
        self._backend = backend
        output_channels = filters.num_channels
        input_channels = 1 if mode is Mode.BROADCAST else output_channels
        bins = cfg.bin_count

        self.window = np.zeros((input_channels, cfg.fft_size), dtype=SAMPLE_DTYPE)
        self.input_spectra = np.zeros((input_channels, bins), dtype=SPECTRUM_DTYPE)
        self.fdl = FrequencyDelayLine(input_channels, filters.partition_count, bins)
        self.accumulator = np.zeros((output_channels, bins), dtype=SPECTRUM_DTYPE)
        self.time_buffer = np.zeros((output_channels, cfg.fft_size), dtype=SAMPLE_DTYPE)

        self.input_chunks = split_range(input_channels, backend.workers)
        self.output_chunks = split_range(output_channels, backend.workers)
        self.mac_tasks = backend.plan_mac(output_channels, filters.partition_count)
        parts = 1 + max(task.part for task in self.mac_tasks)
        # Partial sums exist only when partitions are split; they are reduced in range order.
        self.partials = (
            np.zeros((parts, output_channels, bins), dtype=SPECTRUM_DTYPE) if parts > 1 else None
        )

    @property
    def output(self) -> np.ndarray:
        """Valid overlap-save samples: the last n_x samples of each inverse transform."""
        return self.time_buffer[:, self.block_size :]

    def _transform_inputs(self, chunk: tuple[int, int]) -> None:
        lo, hi = chunk
        self.plan.forward(self.window[lo:hi], out=self.input_spectra[lo:hi])

    def _accumulate(self, task: MacTask) -> None:
        slots = self.fdl.view()[:, task.k0 : task.k1]
        if self.mode is Mode.ELEMENTWISE:
            slots = slots[task.c0 : task.c1]
        dest = self.accumulator if self.partials is None else self.partials[task.part]
        spectra = self.spectra[task.c0 : task.c1, task.k0 : task.k1]
        accumulate_partitions(slots, spectra, self.mode, dest[task.c0 : task.c1])

    def _transform_outputs(self, chunk: tuple[int, int]) -> None:
        lo, hi = chunk
        self.plan.inverse(self.accumulator[lo:hi], out=self.time_buffer[lo:hi])

    def process(self, block: np.ndarray) -> np.ndarray:
        n_x = self.block_size
        # Input packing: left-shift the sliding window by one block, append the new block.
        self.window[:, :n_x] = self.window[:, n_x:]
        self.window[:, n_x:] = block
        self._backend.run(self._transform_inputs, self.input_chunks)
        self.fdl.push(self.input_spectra)
        self._backend.run(self._accumulate, self.mac_tasks)
        if self.partials is not None:
            np.sum(self.partials, axis=0, out=self.accumulator)
        self._backend.run(self._transform_outputs, self.output_chunks)
        return self.output

    def reset(self) -> None:
        self.window.fill(0)
        self.input_spectra.fill(0)
        self.fdl.reset()
        self.accumulator.fill(0)
        self.time_buffer.fill(0)
        if self.partials is not None:
            self.partials.fill(0)


class HostBackend(Backend):
    """Host NumPy backend; serial with one worker, thread-pooled with more."""

    def __init__(self, descriptor: BackendDescriptor, workers: int = 1):
        self.descriptor = descriptor
        self.workers = max(1, workers)
        self._executor = (
            ThreadPoolExecutor(max_workers=self.workers, thread_name_prefix="fdl-mac")
            if self.workers > 1
            else None
        )

    def run(self, fn, items: list) -> None:
        """Apply `fn` to every work item, on the pool when there is more than one item. Results
        are awaited in submission order so the first failure is the one raised."""
        if self._executor is None or len(items) == 1:
            for item in items:
                fn(item)
            return
        futures = [self._executor.submit(fn, item) for item in items]
        for future in futures:
            future.result()

    def plan_mac(self, output_channels: int, partitions: int) -> list[MacTask]:
        """Split the multiply-accumulate by output channel first, then by partition range when
        channels alone cannot occupy every worker."""
        channel_chunks = split_range(output_channels, self.workers)
        ranges_per_chunk = 1 if output_channels >= self.workers else self.workers // output_channels
        partition_ranges = split_range(partitions, ranges_per_chunk)
        return [
            MacTask(c0, c1, k0, k1, part)
            for part, (k0, k1) in enumerate(partition_ranges)
            for c0, c1 in channel_chunks
        ]

    def create_kernel(
        self, filters: PartitionedFilterSet, cfg: EngineConfig, mode: Mode
    ) -> HostKernel:
        return HostKernel(filters, cfg, mode, self)

    def spectral_mac(
        self, fdl: FrequencyDelayLine, filters: PartitionedFilterSet, mode: Mode
    ) -> np.ndarray:
        out = np.zeros((filters.num_channels, filters.bin_count), dtype=SPECTRUM_DTYPE)
        tasks = self.plan_mac(filters.num_channels, filters.partition_count)
        parts = 1 + max(task.part for task in tasks)
        partials = np.zeros((parts,) + out.shape, dtype=SPECTRUM_DTYPE)
        slots = np.asarray(fdl.view())

        def accumulate(task: MacTask) -> None:
            task_slots = slots[:, task.k0 : task.k1]
            if mode is Mode.ELEMENTWISE:
                task_slots = task_slots[task.c0 : task.c1]
            accumulate_partitions(
                task_slots,
                filters.spectra[task.c0 : task.c1, task.k0 : task.k1],
                mode,
                partials[task.part, task.c0 : task.c1],
            )

        self.run(accumulate, tasks)
        return np.sum(partials, axis=0, out=out)

    def asarray(self, block: np.ndarray) -> np.ndarray:
        return block

    def to_host(self, array: np.ndarray, out: np.ndarray | None = None) -> np.ndarray:
        if out is None:
            return array.copy()
        np.copyto(out, array)
        return out

    def zeros(self, shape: tuple[int, ...]) -> np.ndarray:
        return np.zeros(shape, dtype=SAMPLE_DTYPE)

    def condition(self, mic: np.ndarray, gain: float, estimate: np.ndarray, out: np.ndarray):
        np.multiply(mic, SAMPLE_DTYPE(gain), out=out)
        return np.subtract(out, estimate, out=out)

    def channel_sum(self, block: np.ndarray, out: np.ndarray) -> np.ndarray:
        return np.sum(block, axis=0, out=out)


class DeviceKernel:
    """PyTorch convolution kernel; every buffer lives on the accelerator device."""

    # pylint: disable=too-many-instance-attributes
    def __init__(
        self, filters: PartitionedFilterSet, cfg: EngineConfig, mode: Mode, device: str
    ):
        self.mode = mode
        self.block_size = cfg.block_size
        self.plan = DftPlan(cfg.fft_size, TorchDftProvider())
        self.spectra = torch.from_numpy(filters.spectra).to(device)
        output_channels = filters.num_channels
        input_channels = 1 if mode is Mode.BROADCAST else output_channels
        bins = cfg.bin_count

        def allocate(shape: tuple[int, ...]):
            return torch.zeros(shape, dtype=torch.complex64, device=device)

        self.window = torch.zeros(
            (input_channels, cfg.fft_size), dtype=torch.float32, device=device
        )
        self.input_spectra = allocate((input_channels, bins))
        self.fdl = FrequencyDelayLine(input_channels, filters.partition_count, bins, allocate)
        self.accumulator = allocate((output_channels, bins))
        self.time_buffer = torch.zeros(
            (output_channels, cfg.fft_size), dtype=torch.float32, device=device
        )
        self._equation = "kb,ckb->cb" if mode is Mode.BROADCAST else "ckb,ckb->cb"

    def process(self, block):
        n_x = self.block_size
        self.window[:, :n_x] = self.window[:, n_x:]
        self.window[:, n_x:] = block
        self.plan.forward(self.window, out=self.input_spectra)
        self.fdl.push(self.input_spectra)
        slots = self.fdl.view()
        if self.mode is Mode.BROADCAST:
            slots = slots[0]
        self.accumulator.copy_(torch.einsum(self._equation, slots, self.spectra))
        self.plan.inverse(self.accumulator, out=self.time_buffer)
        return self.time_buffer[:, n_x:]

    def reset(self) -> None:
        self.window.zero_()
        self.input_spectra.zero_()
        self.fdl.reset()
        self.accumulator.zero_()
        self.time_buffer.zero_()


class TorchDftProvider:
    """Transforms through `torch.fft` on the tensors' own device."""

    name = "torch"

    def rfft(self, buffer, out=None):
        return torch.fft.rfft(buffer, dim=-1, out=out)

    def irfft(self, spectrum, size: int, out=None):
        return torch.fft.irfft(spectrum, n=size, dim=-1, out=out)


class AcceleratorBackend(Backend):
    """CUDA backend through PyTorch."""

    def __init__(self, descriptor: BackendDescriptor, device: str = "cuda"):
        self.descriptor = descriptor
        self.device = device

    @property
    def transform_placement(self) -> str:
        return "device"

    def create_kernel(
        self, filters: PartitionedFilterSet, cfg: EngineConfig, mode: Mode
    ) -> DeviceKernel:
        return DeviceKernel(filters, cfg, mode, self.device)

    def spectral_mac(
        self, fdl: FrequencyDelayLine, filters: PartitionedFilterSet, mode: Mode
    ) -> np.ndarray:
        slots = torch.as_tensor(np.asarray(fdl.view()), device=self.device)
        spectra = torch.from_numpy(filters.spectra).to(self.device)
        if mode is Mode.BROADCAST:
            result = torch.einsum("kb,ckb->cb", slots[0], spectra)
        else:
            result = torch.einsum("ckb,ckb->cb", slots, spectra)
        return result.cpu().numpy()

    def asarray(self, block: np.ndarray):
        return torch.from_numpy(block).to(self.device, non_blocking=True)

    def to_host(self, array, out: np.ndarray | None = None) -> np.ndarray:
        if out is None:
            # Own copy even when the device is the host.
            return array.to("cpu", copy=True).numpy()
        np.copyto(out, array.cpu().numpy())
        return out

    def zeros(self, shape: tuple[int, ...]):
        return torch.zeros(shape, dtype=torch.float32, device=self.device)

    def condition(self, mic, gain: float, estimate, out):
        torch.mul(mic, gain, out=out)
        return torch.sub(out, estimate, out=out)

    def channel_sum(self, block, out):
        return torch.sum(block, dim=0, out=out)


def _accelerator_device_name() -> str | None:
    """Name of the first CUDA device, or None when there is none (or no torch)."""
    if not TORCH_AVAILABLE:
        return None
    try:
        if torch.cuda.is_available():
            return torch.cuda.get_device_name(0)
    except RuntimeError as e:
        logger.warning("Accelerator detection failed: %s", e)
    return None


@functools.cache
def _backends() -> dict[str, Backend]:
    workers = os.cpu_count() or 1
    backends: dict[str, Backend] = {
        "reference": HostBackend(BackendDescriptor("reference", "reference", True, "serial")),
        "parallel": HostBackend(
            BackendDescriptor("parallel", "parallel", True, f"{workers} workers"), workers
        ),
    }
    device_name = _accelerator_device_name()
    if device_name is not None:
        backends["accelerator"] = AcceleratorBackend(
            BackendDescriptor("accelerator", "accelerator", True, device_name)
        )
    logger.debug("Detected backends: %s", ", ".join(backends))
    return backends


def list_backends() -> list[BackendDescriptor]:
    """Descriptors of the backends usable on this machine, detected once per process. The
    reference backend always comes first.

    Returns:
        list[BackendDescriptor]: reference, parallel, and accelerator when a device exists.
    """
    return [backend.descriptor for backend in _backends().values()]


def resolve_backend_name(name: str) -> str:
    """Map CLI aliases (`cpu`, `gpu`) onto backend names."""
    return BACKEND_ALIASES.get(name, name)


def get_backend(backend: "str | Backend" = "reference") -> Backend:
    """Look up a backend by name or alias (or pass a backend object through).

    Args:
        backend (str | Backend, optional): Backend name, alias, or object. Defaults to
            "reference".

    Raises:
        exceptions.BackendUnavailable: When the name is unknown or its backend was not
            detected on this machine.

    Returns:
        Backend: The shared backend object.
    """
    if isinstance(backend, Backend):
        return backend
    name = resolve_backend_name(backend)
    backends = _backends()
    if name not in backends:
        known = ", ".join(["reference", "parallel", "accelerator", *BACKEND_ALIASES])
        raise exceptions.BackendUnavailable(
            f"Backend {backend!r} is not available here (known names: {known}; "
            f"available: {', '.join(backends)})"
        )
    return backends[name]


def spectral_mac(
    fdl: FrequencyDelayLine,
    filters: PartitionedFilterSet,
    mode: Mode,
    backend: "str | Backend" = "reference",
) -> np.ndarray:
    """Spectral multiply-accumulate of a host-resident FDL against a filter set:
    out[c][j] = sum_k fdl_slot(k)[j] * spectra[c][k][j], reading the shared FDL channel in
    broadcast mode and FDL channel c in elementwise mode.

    Args:
        fdl (FrequencyDelayLine): Delay line with K = `filters.partition_count` slots.
        filters (PartitionedFilterSet): Sub-filter spectra.
        mode (Mode): Channel mapping.
        backend (str | Backend, optional): Backend to run on. Defaults to "reference".

    Raises:
        exceptions.ShapeMismatch: When capacities, bin counts or channel counts disagree.

    Returns:
        np.ndarray: complex64 array of shape `(C_out, bins)`.
    """
    if fdl.capacity != filters.partition_count or fdl.bin_count != filters.bin_count:
        raise exceptions.ShapeMismatch(
            f"FDL (K={fdl.capacity}, bins={fdl.bin_count}) does not match filters "
            f"(K={filters.partition_count}, bins={filters.bin_count})"
        )
    expected_channels = 1 if mode is Mode.BROADCAST else filters.num_channels
    if fdl.channels != expected_channels:
        raise exceptions.ShapeMismatch(
            f"{mode.value} mode needs an FDL with {expected_channels} channel(s), got "
            f"{fdl.channels}"
        )
    return get_backend(backend).spectral_mac(fdl, filters, mode)
