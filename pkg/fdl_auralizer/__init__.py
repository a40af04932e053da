"""fdl-auralizer: uniform partitioned convolution with integrated feedback cancellation.

The names re-exported here are the library surface; the CLI lives in `fdl_auralizer.cli`.
"""

from fdl_auralizer.config import EngineConfig, latency_budget, partition_count, validate_config
from fdl_auralizer.blocks import (
    AudioBlock,
    FrequencyDelayLine,
    PartitionedFilterSet,
    SpectrumBlock,
)
from fdl_auralizer.dft import DftPlan, forward_real, inverse_real
from fdl_auralizer.backends import BackendDescriptor, get_backend, list_backends, spectral_mac
from fdl_auralizer.convolver import Convolver, Mode, create_convolver
from fdl_auralizer.auralizer import Auralizer, create_auralizer

__all__ = [
    "AudioBlock",
    "Auralizer",
    "BackendDescriptor",
    "Convolver",
    "DftPlan",
    "EngineConfig",
    "FrequencyDelayLine",
    "Mode",
    "PartitionedFilterSet",
    "SpectrumBlock",
    "create_auralizer",
    "create_convolver",
    "forward_real",
    "get_backend",
    "inverse_real",
    "latency_budget",
    "list_backends",
    "partition_count",
    "spectral_mac",
    "validate_config",
]
