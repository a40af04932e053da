"""
Filter and signal files.

Two filter formats are understood:

- WAV: RIFF/WAVE with 32-bit IEEE float samples, one channel per filter, interleaved frames.
- raw: planar little-endian 32-bit floats (filter 0 first) next to a YAML sidecar named
  `<file>.yml` holding the integer keys `channels`, `length` and `sample_rate`. Used for filter
  sets too large for a WAV file.

Signals are always 32-bit float WAV files. Arrays are planar `(channels, samples)` in memory.
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Any, Literal

import numpy as np
import soundfile as sf
import yaml

from fdl_auralizer import exceptions
from fdl_auralizer.auralizer import Auralizer
from fdl_auralizer.blocks import SAMPLE_DTYPE, Mode
from fdl_auralizer.config import DEFAULT_BLOCK_SIZE, EngineConfig
from fdl_auralizer.convolver import Convolver
from fdl_auralizer.logging import logger

WAV_FORMATS = ("WAV", "WAVEX")
WAV_SUBTYPE = "FLOAT"
RAW_DTYPE = np.dtype("<f4")
SIDECAR_KEYS = ("channels", "length", "sample_rate")

FilterFormat = Literal["wav_float32", "raw_f32le_with_sidecar"]


@dataclass(frozen=True)
class FilterFile:
    """Header of a filter file.

    Attributes:
        format (FilterFormat): "wav_float32" or "raw_f32le_with_sidecar".
        channels (int): Filter count C_out.
        length (int): Filter length n_h.
        sample_rate_hz (int): Sample rate the filters were designed for.
    """

    format: FilterFormat
    channels: int
    length: int
    sample_rate_hz: int


def sidecar_path(path: Path) -> Path:
    """Sidecar of a raw filter file: the file name with `.yml` appended."""
    return path.with_suffix(path.suffix + ".yml")


def filter_format(path: Path) -> FilterFormat:
    """Format of a filter path: WAV for `.wav` files, raw with a sidecar otherwise."""
    if path.suffix.lower() == ".wav":
        return "wav_float32"
    return "raw_f32le_with_sidecar"


def _check_sample_rate(path: Path, sample_rate_hz: int, expected: int | None) -> None:
    if expected is not None and sample_rate_hz != expected:
        logger.error("Sample rate of %s is %s Hz, expected %s Hz", path, sample_rate_hz, expected)
        raise exceptions.SampleRateMismatch(
            f"{path} is sampled at {sample_rate_hz} Hz but the engine runs at {expected} Hz"
        )


def _read_wav(path: Path) -> tuple[np.ndarray, int]:
    try:
        info = sf.info(str(path))
        if info.format not in WAV_FORMATS or info.subtype != WAV_SUBTYPE:
            raise exceptions.UnsupportedFormat(
                f"{path} is {info.format}/{info.subtype}; expected 32-bit float WAV"
            )
        frames, sample_rate = sf.read(str(path), dtype="float32", always_2d=True)
    except RuntimeError as e:
        raise exceptions.CorruptHeader(f"Cannot decode {path}: {e}") from e
    return np.ascontiguousarray(frames.T), int(sample_rate)


def _write_wav(path: Path, data: np.ndarray, sample_rate_hz: int) -> None:
    frames = np.asarray(data, dtype=SAMPLE_DTYPE).T
    sf.write(str(path), frames, sample_rate_hz, format="WAV", subtype=WAV_SUBTYPE)


def _read_sidecar(path: Path) -> dict[str, int]:
    sidecar = sidecar_path(path)
    if not sidecar.exists():
        raise exceptions.UnsupportedFormat(
            f"{path} is not a WAV file and has no sidecar {sidecar.name}"
        )
    try:
        header = yaml.safe_load(sidecar.read_text(encoding="utf-8"))
        values = {key: header[key] for key in SIDECAR_KEYS}
    except (yaml.YAMLError, KeyError, TypeError) as e:
        raise exceptions.CorruptHeader(
            f"Sidecar {sidecar} must hold integer keys {', '.join(SIDECAR_KEYS)}"
        ) from e
    # YAML booleans are ints to isinstance.
    if not all(
        isinstance(value, int) and not isinstance(value, bool) and value > 0
        for value in values.values()
    ):
        raise exceptions.CorruptHeader(f"Sidecar {sidecar} has non-positive or non-integer values")
    return values


def read_filters(path: Path, sample_rate_hz: int | None = None) -> tuple[np.ndarray, FilterFile]:
    """Read a filter set.

    Args:
        path (Path): WAV file, or raw file with a `<file>.yml` sidecar.
        sample_rate_hz (int | None, optional): Engine sample rate to check the file against.
            Defaults to None (no check).

    Raises:
        exceptions.UnsupportedFormat: When the file is neither a 32-bit float WAV nor a raw
            file with a sidecar.
        exceptions.CorruptHeader: When the header cannot be parsed or disagrees with the data.
        exceptions.SampleRateMismatch: When the file rate differs from `sample_rate_hz`.

    Returns:
        tuple[np.ndarray, FilterFile]: float32 filters of shape `(C_out, n_h)` and the header.
    """
    if filter_format(path) == "wav_float32":
        filters, rate = _read_wav(path)
        header = FilterFile("wav_float32", filters.shape[0], filters.shape[1], rate)
    else:
        values = _read_sidecar(path)
        data = np.fromfile(path, dtype=RAW_DTYPE)
        expected = values["channels"] * values["length"]
        if data.size != expected:
            raise exceptions.CorruptHeader(
                f"{path} holds {data.size} samples, sidecar declares {values['channels']} x "
                f"{values['length']} = {expected}"
            )
        filters = data.astype(SAMPLE_DTYPE).reshape(values["channels"], values["length"])
        header = FilterFile(
            "raw_f32le_with_sidecar", values["channels"], values["length"], values["sample_rate"]
        )
    _check_sample_rate(path, header.sample_rate_hz, sample_rate_hz)
    logger.info(
        "Read %s filters of %s samples @ %s Hz from %s",
        header.channels,
        header.length,
        header.sample_rate_hz,
        path,
    )
    return filters, header


def write_filters(path: Path, filters: Any, sample_rate_hz: int) -> FilterFile:
    """Write a filter set as 32-bit float WAV (`.wav` paths) or raw f32le plus sidecar.

    Args:
        path (Path): Destination file.
        filters (Any): Array of shape `(C_out, n_h)`.
        sample_rate_hz (int): Sample rate recorded in the header.

    Returns:
        FilterFile: Header of the written file.
    """
    data = np.atleast_2d(np.asarray(filters, dtype=SAMPLE_DTYPE))
    channels, length = data.shape
    fmt = filter_format(path)
    if fmt == "wav_float32":
        _write_wav(path, data, sample_rate_hz)
    else:
        data.astype(RAW_DTYPE).tofile(path)
        sidecar_path(path).write_text(
            yaml.safe_dump(
                {"channels": channels, "length": length, "sample_rate": sample_rate_hz},
                sort_keys=False,
            ),
            encoding="utf-8",
        )
    logger.info("Wrote %s filters of %s samples to %s", channels, length, path)
    return FilterFile(fmt, channels, length, sample_rate_hz)


def read_signal(path: Path) -> tuple[np.ndarray, int]:
    """Read a 32-bit float WAV signal.

    Raises:
        exceptions.UnsupportedFormat: When the file is not a 32-bit float WAV.
        exceptions.CorruptHeader: When the file cannot be decoded.

    Returns:
        tuple[np.ndarray, int]: float32 samples of shape `(channels, frames)` and the sample
            rate.
    """
    signal, rate = _read_wav(path)
    logger.info("Read %s x %s samples @ %s Hz from %s", *signal.shape, rate, path)
    return signal, rate


def write_signal(path: Path, signal: Any, sample_rate_hz: int) -> None:
    """Write a planar `(channels, frames)` signal as an interleaved 32-bit float WAV."""
    data = np.atleast_2d(np.asarray(signal, dtype=SAMPLE_DTYPE))
    _write_wav(path, data, sample_rate_hz)
    logger.info("Wrote %s x %s samples to %s", *data.shape, path)


def process_file(
    input_path: Path,
    filters_path: Path,
    output_path: Path,
    fc_filters_path: Path | None = None,
    block_size: int = DEFAULT_BLOCK_SIZE,
    device: str = "reference",
    input_gain: float = 1.0,
) -> EngineConfig:
    """Auralize a mono WAV file (or only convolve it when no feedback-cancellation filters are
    given) and write the C_out-channel result. The input is streamed in blocks of n_x samples,
    the final block zero-padded, so the output length is the input length rounded up to a
    multiple of n_x. The engine runs at the input file's sample rate.

    Args:
        input_path (Path): Mono 32-bit float WAV.
        filters_path (Path): Synthesis filter file.
        output_path (Path): Destination WAV.
        fc_filters_path (Path | None, optional): Feedback-cancellation filter file. Defaults
            to None.
        block_size (int, optional): Block size n_x. Defaults to 128.
        device (str, optional): Backend name. Defaults to "reference".
        input_gain (float, optional): Gain applied to the input. Defaults to 1.0.

    Raises:
        exceptions.ShapeMismatch: When the input is not mono.
        exceptions.EmptyInput: When the input has no samples.
        exceptions.SampleRateMismatch: When a filter file rate differs from the input rate.

    Returns:
        EngineConfig: Configuration the file was processed with.
    """
    signal, sample_rate = read_signal(input_path)
    if signal.shape[0] != 1:
        raise exceptions.ShapeMismatch(
            f"{input_path} has {signal.shape[0]} channels; expected mono"
        )
    if signal.shape[1] == 0:
        raise exceptions.EmptyInput(f"{input_path} has no samples")
    synth_filters, header = read_filters(filters_path, sample_rate)
    cfg = EngineConfig.for_block_size(block_size, sample_rate, output_channels=header.channels)

    if fc_filters_path is None:
        conv = Convolver(synth_filters, cfg, Mode.BROADCAST, backend=device)
        output = conv.convolve_signal(np.float32(input_gain) * signal[0])
    else:
        fc_filters, _ = read_filters(fc_filters_path, sample_rate)
        aur = Auralizer(synth_filters, fc_filters, cfg, input_gain=input_gain, backend=device)
        output = aur.auralize_signal(signal[0])

    write_signal(output_path, output, sample_rate)
    return cfg
