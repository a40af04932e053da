"""
Timed sweeps of the convolver and auralizer pipelines.

A sweep varies one parameter (block size, synthesis filter length, output channel count or
feedback-cancellation filter length) with every other parameter held at its fixed default. For
each swept value the subject is built from seeded standard-normal filters and inputs, warmed up,
then timed one block call at a time with a monotonic nanosecond clock. Construction and filter
transforms are never timed.

Results are written as CSV, one `TimingRecord` per row.
"""

import csv
import math
import time
from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
from scipy import stats

from fdl_auralizer import exceptions
from fdl_auralizer.auralizer import Auralizer
from fdl_auralizer.backends import TORCH_AVAILABLE, get_backend, resolve_backend_name, torch
from fdl_auralizer.blocks import SAMPLE_DTYPE, Mode
from fdl_auralizer.config import (
    DEFAULT_BLOCK_SIZE,
    DEFAULT_SAMPLE_RATE_HZ,
    EngineConfig,
    latency_budget,
    seconds_to_samples,
)
from fdl_auralizer.convolver import Convolver
from fdl_auralizer.logging import backend_logger, logger
from fdl_auralizer.oracle import scaled_random_filters

SUBJECTS = ("convolver", "auralizer")
SWEEP_VALUES: dict[str, tuple[int | float, ...]] = {
    "block_size": (16, 32, 64, 128, 256, 512, 1024, 2048, 4096),
    "filter_length_s": (0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0),
    "channels": (1, 2, 4, 8, 16, 32, 64, 128),
    "fc_length_s": (0.1, 0.5, 1.0, 2.0, 5.0),
}
INTEGER_PARAMETERS = ("block_size", "channels")
CSV_HEADER = (
    "subject",
    "backend",
    "parameter",
    "value",
    "mean_s",
    "min_s",
    "max_s",
    "trials",
    "budget_s",
    "realtime",
)
INPUT_POOL_BLOCKS = 256

_OOM_ERRORS: tuple[type[BaseException], ...] = (MemoryError,)
if TORCH_AVAILABLE:
    _OOM_ERRORS += (torch.cuda.OutOfMemoryError,)


def sweep_parameter_name(sweep: str) -> str:
    """Map a CLI sweep name (`block-size`) onto its parameter name (`block_size`)."""
    name = sweep.replace("-", "_")
    if name in ("filter_length", "fc_length"):
        name += "_s"
    if name not in SWEEP_VALUES:
        raise exceptions.ConfigError(
            f"Unknown sweep {sweep!r}; choose one of {', '.join(SWEEP_VALUES)}"
        )
    return name


@dataclass(frozen=True)
class SweepSpec:
    """One benchmark sweep on one backend.

    Attributes:
        subject (str): "convolver" (synthesis stage only) or "auralizer" (synthesis plus
            feedback cancellation).
        backend (str): Backend name or alias.
        parameter (str): Swept parameter: block_size, filter_length_s, channels or fc_length_s.
        values (tuple[int | float, ...]): Swept values, strictly increasing. Defaults to the
            standard range of `parameter`.
        sample_rate_hz (int): f_s. Defaults to 48000.
        block_size (int): Fixed n_x. Defaults to 128.
        channels (int): Fixed C_out. Defaults to 32.
        filter_length_s (float): Fixed synthesis filter length in seconds. Defaults to 10.
        fc_length_s (float): Fixed feedback-cancellation filter length in seconds. Defaults to 1.
        trials (int): Timed block calls per value. Defaults to 10000.
        warmup_trials (int): Untimed block calls before timing. Defaults to 100.
        rng_seed (int): Seed of the filters and inputs. Defaults to 0.
    """

    # pylint: disable=too-many-instance-attributes
    subject: str
    backend: str
    parameter: str
    values: tuple[int | float, ...] = ()
    sample_rate_hz: int = DEFAULT_SAMPLE_RATE_HZ
    block_size: int = DEFAULT_BLOCK_SIZE
    channels: int = 32
    filter_length_s: float = 10.0
    fc_length_s: float = 1.0
    trials: int = 10000
    warmup_trials: int = 100
    rng_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "backend", resolve_backend_name(self.backend))
        if self.subject not in SUBJECTS:
            raise exceptions.ConfigError(
                f"Unknown subject {self.subject!r}; choose one of {', '.join(SUBJECTS)}"
            )
        if self.parameter not in SWEEP_VALUES:
            raise exceptions.ConfigError(f"Unknown sweep parameter: {self.parameter!r}")
        if self.parameter == "fc_length_s" and self.subject != "auralizer":
            raise exceptions.ConfigError("The fc-length sweep needs the auralizer subject")
        object.__setattr__(self, "values", tuple(self.values) or SWEEP_VALUES[self.parameter])
        if any(b <= a for a, b in zip(self.values, self.values[1:])):
            raise exceptions.ConfigError(f"Swept values must strictly increase: {self.values}")
        if self.trials < 1 or self.warmup_trials < 1:
            raise exceptions.ConfigError(
                f"Trials and warmup trials must be positive: trials={self.trials}, "
                f"warmup_trials={self.warmup_trials}"
            )

    def settings(self, value: int | float) -> dict[str, Any]:
        """Fixed defaults with the swept parameter replaced by `value`."""
        point = {
            "block_size": self.block_size,
            "channels": self.channels,
            "filter_length_s": self.filter_length_s,
            "fc_length_s": self.fc_length_s,
        }
        point[self.parameter] = value
        return point


@dataclass(frozen=True)
class Workload:
    """Seeded filters and input blocks for one swept value.

    Attributes:
        cfg (EngineConfig): Engine configuration (C_in = 1).
        synth_filters (np.ndarray): `(C_out, n_h_aur)` synthesis filters.
        fc_filters (np.ndarray | None): `(C_out, n_h_fc)` filters for the auralizer subject.
        inputs (np.ndarray): Pool of float32 input blocks `(blocks, 1, n_x)`, cycled by the
            timing loop.
    """

    cfg: EngineConfig
    synth_filters: np.ndarray
    fc_filters: np.ndarray | None
    inputs: np.ndarray = field(repr=False)


def make_workload(spec: SweepSpec, index: int) -> Workload:
    """Build the filters and inputs for `spec.values[index]`. The generator is seeded with
    `(rng_seed, index)`, so every value has its own reproducible workload.

    Returns:
        Workload: The workload.
    """
    point = spec.settings(spec.values[index])
    rng = np.random.default_rng((spec.rng_seed, index))
    cfg = EngineConfig.for_block_size(
        int(point["block_size"]), spec.sample_rate_hz, output_channels=int(point["channels"])
    )
    synth_length = seconds_to_samples(point["filter_length_s"], spec.sample_rate_hz)
    synth_filters = scaled_random_filters(rng, cfg.output_channels, synth_length)
    fc_filters = None
    if spec.subject == "auralizer":
        fc_length = seconds_to_samples(point["fc_length_s"], spec.sample_rate_hz)
        fc_filters = scaled_random_filters(rng, cfg.output_channels, fc_length)
    pool = min(INPUT_POOL_BLOCKS, spec.trials + spec.warmup_trials)
    inputs = rng.standard_normal((pool, 1, cfg.block_size)).astype(SAMPLE_DTYPE)
    return Workload(cfg, synth_filters, fc_filters, inputs)


@dataclass(frozen=True)
class TimingRecord:
    """Per-block processing time of one subject at one swept value.

    Attributes:
        subject (str): "convolver" or "auralizer".
        backend (str): Backend name.
        parameter (str): Swept parameter name.
        value (int | float): Swept value.
        mean_s (float): Mean time per block call, in seconds.
        min_s (float): Fastest call.
        max_s (float): Slowest call.
        trials (int): Timed calls.
        budget_s (float): Latency budget n_x / f_s.
        realtime (bool): Whether `mean_s < budget_s`.
    """

    # pylint: disable=too-many-instance-attributes
    subject: str
    backend: str
    parameter: str
    value: int | float
    mean_s: float
    min_s: float
    max_s: float
    trials: int
    budget_s: float
    realtime: bool

    def __post_init__(self):
        if not self.min_s <= self.mean_s <= self.max_s:
            raise exceptions.CorruptRecord(
                f"Timing record out of order: min={self.min_s}, mean={self.mean_s}, "
                f"max={self.max_s}"
            )

    def as_row(self) -> list[str]:
        """CSV cells: shortest round-trip floats, lowercase booleans."""
        return [
            self.subject,
            self.backend,
            self.parameter,
            repr(self.value),
            repr(self.mean_s),
            repr(self.min_s),
            repr(self.max_s),
            str(self.trials),
            repr(self.budget_s),
            "true" if self.realtime else "false",
        ]

    @classmethod
    def from_row(cls, row: dict[str, str]) -> "TimingRecord":
        """Specialized constructor parsing one CSV row written by `as_row`.

        Raises:
            exceptions.CorruptRecord: When a cell is missing or malformed.
        """
        try:
            parameter = row["parameter"]
            value_type = int if parameter in INTEGER_PARAMETERS else float
            if row["realtime"] not in ("true", "false"):
                raise ValueError(f"realtime must be true or false: {row['realtime']!r}")
            return cls(
                subject=row["subject"],
                backend=row["backend"],
                parameter=parameter,
                value=value_type(row["value"]),
                mean_s=float(row["mean_s"]),
                min_s=float(row["min_s"]),
                max_s=float(row["max_s"]),
                trials=int(row["trials"]),
                budget_s=float(row["budget_s"]),
                realtime=row["realtime"] == "true",
            )
        except (KeyError, TypeError, ValueError) as e:
            raise exceptions.CorruptRecord(f"Cannot parse timing row {row}: {e}") from e


def build_subject(
    spec: SweepSpec, workload: Workload
) -> Callable[[np.ndarray, np.ndarray], Any]:
    """Construct the subject and return its one-block call `(block, out) -> out`."""
    if spec.subject == "auralizer":
        aur = Auralizer(
            workload.synth_filters, workload.fc_filters, workload.cfg, backend=spec.backend
        )
        return lambda block, out: aur.auralize(block, out=out)
    conv = Convolver(workload.synth_filters, workload.cfg, Mode.BROADCAST, backend=spec.backend)
    return lambda block, out: conv.convolve(block, out=out)


def time_calls(
    call: Callable[[np.ndarray, np.ndarray], Any],
    inputs: np.ndarray,
    out: np.ndarray,
    trials: int,
    warmup_trials: int,
) -> np.ndarray:
    """Run `warmup_trials` untimed calls, then time `trials` calls one at a time.

    Returns:
        np.ndarray: int64 nanoseconds per timed call.
    """
    pool = len(inputs)
    for i in range(warmup_trials):
        call(inputs[i % pool], out)
    elapsed = np.empty(trials, dtype=np.int64)
    for i in range(trials):
        block = inputs[(warmup_trials + i) % pool]
        start = time.perf_counter_ns()
        call(block, out)
        elapsed[i] = time.perf_counter_ns() - start
    return elapsed


def measure(spec: SweepSpec, index: int) -> TimingRecord:
    """Build, warm up and time the subject for `spec.values[index]`.

    Raises:
        exceptions.OutOfMemory: When the workload or subject cannot be allocated.

    Returns:
        TimingRecord: The measurement.
    """
    value = spec.values[index]
    try:
        workload = make_workload(spec, index)
        call = build_subject(spec, workload)
        cfg = workload.cfg
        out = np.empty((cfg.output_channels, cfg.block_size), dtype=SAMPLE_DTYPE)
        elapsed = time_calls(call, workload.inputs, out, spec.trials, spec.warmup_trials)
    except _OOM_ERRORS as e:
        raise exceptions.OutOfMemory(
            f"{spec.subject} on {spec.backend} ran out of memory at {spec.parameter}={value}: {e}"
        ) from e

    min_s = int(elapsed.min()) * 1e-9
    max_s = int(elapsed.max()) * 1e-9
    mean_s = min(max(int(elapsed.sum()) / spec.trials * 1e-9, min_s), max_s)
    budget_s = latency_budget(workload.cfg)
    return TimingRecord(
        subject=spec.subject,
        backend=spec.backend,
        parameter=spec.parameter,
        value=value,
        mean_s=mean_s,
        min_s=min_s,
        max_s=max_s,
        trials=spec.trials,
        budget_s=budget_s,
        realtime=mean_s < budget_s,
    )


def run_sweep(spec: SweepSpec) -> list[TimingRecord]:
    """Measure every swept value in order, one configuration at a time. A value whose
    configuration runs out of memory is logged and skipped.

    Args:
        spec (SweepSpec): Sweep to run.

    Raises:
        exceptions.BackendUnavailable: When the backend is not available here.

    Returns:
        list[TimingRecord]: One record per measured value, in the order of `spec.values`.
    """
    backend = get_backend(spec.backend)
    fixed = {
        name: setting
        for name, setting in spec.settings(spec.values[0]).items()
        if name != spec.parameter and (name != "fc_length_s" or spec.subject == "auralizer")
    }
    log = backend_logger(backend.name)
    log.info(
        "Sweeping %s over %s with %s (transforms on the %s)",
        spec.subject,
        spec.parameter,
        fixed,
        backend.transform_placement,
    )
    records = []
    for index, value in enumerate(spec.values):
        log.info(
            "Timing %s: %s=%s (%s trials)",
            spec.subject,
            spec.parameter,
            value,
            spec.trials,
        )
        try:
            record = measure(spec, index)
        except exceptions.OutOfMemory as e:
            log.error("Skipping configuration: %s", e)
            continue
        log.info(
            "  mean %.3g s (budget %.3g s, %s)",
            record.mean_s,
            record.budget_s,
            "real-time" if record.realtime else "not real-time",
        )
        records.append(record)
    return records


def emit_csv(records: Sequence[TimingRecord], path: Path) -> None:
    """Write timing records as UTF-8 CSV with a header row and `\\n` line endings.

    Args:
        records (Sequence[TimingRecord]): Records to write; at least one.
        path (Path): Destination file.

    Raises:
        exceptions.EmptyInput: When there is no record.
        OSError: When the file cannot be written.
    """
    if not records:
        raise exceptions.EmptyInput("No timing records to write")
    with path.open("w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        writer.writerows(record.as_row() for record in records)
    logger.info("Wrote %s timing records to %s", len(records), path)


def read_csv(path: Path) -> list[TimingRecord]:
    """Parse a CSV written by `emit_csv` back into records.

    Raises:
        exceptions.CorruptRecord: When the header or a row is malformed.
    """
    with path.open(encoding="utf-8", newline="") as f:
        reader = csv.DictReader(f)
        if tuple(reader.fieldnames or ()) != CSV_HEADER:
            raise exceptions.CorruptRecord(f"Unexpected CSV header in {path}: {reader.fieldnames}")
        return [TimingRecord.from_row(row) for row in reader]


@dataclass(frozen=True)
class SweepSummary:
    """Trend of one sweep.

    Attributes:
        subject (str): Subject of the sweep.
        backend (str): Backend of the sweep.
        parameter (str): Swept parameter.
        first_value (int | float): Smallest measured value.
        last_value (int | float): Largest measured value.
        ratio (float): Mean time at the last value over mean time at the first.
        spearman_rho (float): Rank correlation of mean time against the swept value; NaN with
            fewer than two records or constant timings.
        realtime_count (int): Records meeting their latency budget.
        count (int): Records in the sweep.
    """

    # pylint: disable=too-many-instance-attributes
    subject: str
    backend: str
    parameter: str
    first_value: int | float
    last_value: int | float
    ratio: float
    spearman_rho: float
    realtime_count: int
    count: int


def summarize_sweep(records: Sequence[TimingRecord]) -> SweepSummary:
    """Summarize the records of one sweep (one subject, backend and parameter).

    Raises:
        exceptions.EmptyInput: When there is no record.

    Returns:
        SweepSummary: Last-to-first ratio and Spearman rho of the sweep.
    """
    if not records:
        raise exceptions.EmptyInput("Cannot summarize an empty sweep")
    values = [record.value for record in records]
    means = [record.mean_s for record in records]
    rho = math.nan
    if len(records) > 1 and len(set(means)) > 1:
        rho = float(stats.spearmanr(values, means).statistic)
    return SweepSummary(
        subject=records[0].subject,
        backend=records[0].backend,
        parameter=records[0].parameter,
        first_value=values[0],
        last_value=values[-1],
        ratio=means[-1] / means[0] if means[0] > 0 else math.inf,
        spearman_rho=rho,
        realtime_count=sum(record.realtime for record in records),
        count=len(records),
    )


def group_sweeps(
    records: Iterable[TimingRecord],
) -> dict[tuple[str, str, str], list[TimingRecord]]:
    """Group records by (subject, backend, parameter), keeping their order."""
    groups: dict[tuple[str, str, str], list[TimingRecord]] = {}
    for record in records:
        groups.setdefault((record.subject, record.backend, record.parameter), []).append(record)
    return groups


def speedup_ratios(
    records: Iterable[TimingRecord], baseline: str
) -> dict[str, list[tuple[int | float, float]]]:
    """Measured speedup of each backend against `baseline`: the baseline's mean time over the
    backend's mean time at every value both measured (same subject and parameter).

    Returns:
        dict[str, list[tuple[int | float, float]]]: `(value, speedup)` pairs per backend other
            than the baseline.
    """
    by_key: dict[tuple[str, str, Any], dict[str, float]] = {}
    for record in records:
        key = (record.subject, record.parameter, record.value)
        by_key.setdefault(key, {})[record.backend] = record.mean_s
    ratios: dict[str, list[tuple[int | float, float]]] = {}
    for (_, _, value), means in by_key.items():
        if baseline not in means:
            continue
        for backend, mean_s in means.items():
            if backend != baseline and mean_s > 0:
                ratios.setdefault(backend, []).append((value, means[baseline] / mean_s))
    return ratios
