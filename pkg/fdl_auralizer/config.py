"""
This module holds the engine configuration shared by every other module: the `EngineConfig`
type, its validation, and the sizing arithmetic (partition counts and latency budgets) derived
from it.

It also loads the optional YAML settings file whose contents become the default values of the
CLI options (see `fdl_auralizer.cli`).
"""

from dataclasses import asdict, dataclass, replace
from pathlib import Path
from pprint import pformat
from typing import Any

import yaml
from yaml_extras import ExtrasLoader, yaml_import

from fdl_auralizer import exceptions
from fdl_auralizer.logging import logger

DEFAULT_SAMPLE_RATE_HZ = 48000
DEFAULT_BLOCK_SIZE = 128
MIN_BLOCK_SIZE = 16
MAX_BLOCK_SIZE = 8192
SETTINGS_FILENAME = ".fdl-auralizer.yml"


def is_power_of_two(value: int) -> bool:
    """Check whether the given integer is a positive power of two.

    Args:
        value (int): Integer to check.

    Returns:
        bool: True if `value` is 1, 2, 4, 8, ...
    """
    return value > 0 and value & (value - 1) == 0


@dataclass(frozen=True)
class EngineConfig:
    """Sizing parameters that govern every buffer of a convolver or auralizer.

    Attributes:
        sample_rate_hz (int): Operating sample rate f_s in Hz.
        block_size (int): Block size n_x in samples; a power of two in [16, 8192].
        fft_size (int): Transform size n_f in samples; always exactly `2 * block_size`.
        input_channels (int): Input channel count C_in; either 1 or `output_channels`.
        output_channels (int): Output channel count C_out.
    """

    sample_rate_hz: int
    block_size: int
    fft_size: int
    input_channels: int = 1
    output_channels: int = 1

    @classmethod
    def for_block_size(
        cls,
        block_size: int = DEFAULT_BLOCK_SIZE,
        sample_rate_hz: int = DEFAULT_SAMPLE_RATE_HZ,
        input_channels: int = 1,
        output_channels: int = 1,
    ) -> "EngineConfig":
        """Specialized constructor deriving the FFT size from the block size (n_f = 2 n_x).

        The result is validated before it is returned.

        Args:
            block_size (int, optional): Block size n_x. Defaults to 128.
            sample_rate_hz (int, optional): Sample rate f_s. Defaults to 48000.
            input_channels (int, optional): C_in. Defaults to 1.
            output_channels (int, optional): C_out. Defaults to 1.

        Returns:
            EngineConfig: A validated configuration.
        """
        return validate_config(
            cls(
                sample_rate_hz=sample_rate_hz,
                block_size=block_size,
                fft_size=2 * block_size,
                input_channels=input_channels,
                output_channels=output_channels,
            )
        )

    @classmethod
    def from_dict(cls, config_dict: dict[str, Any]) -> "EngineConfig":
        """Specialized constructor for a configuration written as a mapping, e.g. a section of
        the YAML settings file. `fft_size` may be omitted, in which case it is derived.

        Args:
            config_dict (dict[str, Any]): Mapping with at least `block_size`.

        Raises:
            exceptions.ConfigError: When a key is missing or has a non-integer value, or when
                the resulting configuration is invalid.

        Returns:
            EngineConfig: A validated configuration.
        """
        if "block_size" not in config_dict:
            raise exceptions.ConfigError(
                f"Engine config missing required key: 'block_size':\n{pformat(config_dict)}"
            )
        try:
            block_size = int(config_dict["block_size"])
            cfg = cls(
                sample_rate_hz=int(config_dict.get("sample_rate_hz", DEFAULT_SAMPLE_RATE_HZ)),
                block_size=block_size,
                fft_size=int(config_dict.get("fft_size", 2 * block_size)),
                input_channels=int(config_dict.get("input_channels", 1)),
                output_channels=int(config_dict.get("output_channels", 1)),
            )
        except (TypeError, ValueError) as e:
            raise exceptions.ConfigError(
                f"Invalid value in engine config:\n{pformat(config_dict)}"
            ) from e
        return validate_config(cfg)

    def with_channels(self, input_channels: int, output_channels: int) -> "EngineConfig":
        """Copy of this configuration with other channel counts (validated)."""
        return validate_config(
            replace(self, input_channels=input_channels, output_channels=output_channels)
        )

    def as_dict(self) -> dict[str, int]:
        """Plain mapping of the configuration fields."""
        return asdict(self)

    @property
    def bin_count(self) -> int:
        """Number of real-FFT bins, ceil((n_f + 1) / 2) = n_x + 1."""
        return self.fft_size // 2 + 1

    def validate(self) -> None:
        """Check every invariant of the configuration.

        Raises:
            exceptions.ZeroSampleRate: When the sample rate is not positive.
            exceptions.NonPowerOfTwoBlock: When n_x is not a power of two in [16, 8192].
            exceptions.FftSizeMismatch: When n_f != 2 n_x.
            exceptions.BadChannelCombination: When a channel count is not positive, or when
                C_in is neither 1 nor C_out.
        """
        if self.sample_rate_hz <= 0:
            raise exceptions.ZeroSampleRate(f"Sample rate must be positive: {self.sample_rate_hz}")
        if not (
            is_power_of_two(self.block_size) and MIN_BLOCK_SIZE <= self.block_size <= MAX_BLOCK_SIZE
        ):
            raise exceptions.NonPowerOfTwoBlock(
                f"Block size must be a power of two in [{MIN_BLOCK_SIZE}, {MAX_BLOCK_SIZE}]: "
                f"{self.block_size}"
            )
        if self.fft_size != 2 * self.block_size:
            raise exceptions.FftSizeMismatch(
                f"FFT size must be twice the block size: {self.fft_size} != 2 * {self.block_size}"
            )
        if self.output_channels < 1 or self.input_channels < 1:
            raise exceptions.BadChannelCombination(
                f"Channel counts must be positive: C_in={self.input_channels}, "
                f"C_out={self.output_channels}"
            )
        if self.input_channels not in (1, self.output_channels):
            raise exceptions.BadChannelCombination(
                f"Input channels must be 1 or equal to the output channels: "
                f"C_in={self.input_channels}, C_out={self.output_channels}"
            )


def validate_config(cfg: EngineConfig) -> EngineConfig:
    """Return the configuration unchanged if all of its invariants hold.

    Args:
        cfg (EngineConfig): Configuration to validate.

    Raises:
        exceptions.ConfigError: The specific subclass naming the violated invariant.

    Returns:
        EngineConfig: `cfg` itself.
    """
    cfg.validate()
    return cfg


def partition_count(filter_length: int, block_size: int) -> int:
    """Number of uniform partitions K = ceil(n_h / n_x) needed to cover a filter. The last
    partition is zero-padded when n_h is not a multiple of n_x.

    Args:
        filter_length (int): Filter length n_h in samples.
        block_size (int): Block (and partition) length n_x in samples.

    Raises:
        exceptions.ZeroLength: When either length is zero (or negative).

    Returns:
        int: Partition count K >= 1.
    """
    if filter_length < 1 or block_size < 1:
        raise exceptions.ZeroLength(
            f"Filter and block lengths must be positive: n_h={filter_length}, n_x={block_size}"
        )
    return -(-filter_length // block_size)


def latency_budget(cfg: EngineConfig) -> float:
    """Block-based latency budget n_x / f_s in seconds.

    Args:
        cfg (EngineConfig): Configuration; validated first.

    Returns:
        float: Time available to process one block, in seconds.
    """
    validate_config(cfg)
    return cfg.block_size / cfg.sample_rate_hz


def seconds_to_samples(seconds: float, sample_rate_hz: int) -> int:
    """Length in samples of a duration, rounded to the nearest sample (at least one)."""
    return max(1, round(seconds * sample_rate_hz))


def load_settings(settings_path: Path) -> dict[str, dict[str, Any]]:
    """Load a YAML settings file mapping CLI subcommand names to option defaults, e.g.

    ```yaml
    bench:
      trials: 1000
      devices: [parallel]
    process:
      block_size: 256
    ```

    `!import` tags resolve relative to the settings file's directory.

    Args:
        settings_path (Path): Path to the settings file.

    Raises:
        exceptions.ConfigError: When the file is not a mapping of mappings.

    Returns:
        dict[str, dict[str, Any]]: Option defaults per subcommand (empty for an empty file).
    """
    yaml_import.set_import_relative_dir(settings_path.parent)
    with settings_path.open(encoding="utf-8") as f:
        settings = yaml.load(f, Loader=ExtrasLoader)
    if settings is None:
        return {}
    if not isinstance(settings, dict) or not all(
        isinstance(section, dict) for section in settings.values()
    ):
        logger.error("Invalid settings file: %s", settings_path)
        raise exceptions.ConfigError(
            f"Settings must map subcommand names to option mappings:\n{pformat(settings)}"
        )
    logger.debug("Loaded settings for %s from %s", sorted(settings), settings_path)
    return settings
