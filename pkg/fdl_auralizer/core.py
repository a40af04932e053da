"""
This module provides the "entrypoint functions" called from the Click CLI interface defined in
`fdl_auralizer.cli`: benchmark sweeps, file processing, verification and device listing. Each
returns its results together with the text report the CLI prints.
"""

from collections.abc import Sequence
from pathlib import Path

from fdl_auralizer import exceptions
from fdl_auralizer.audio_io import process_file
from fdl_auralizer.backends import get_backend, list_backends
from fdl_auralizer.bench import (
    SweepSpec,
    TimingRecord,
    emit_csv,
    group_sweeps,
    run_sweep,
    speedup_ratios,
    summarize_sweep,
    sweep_parameter_name,
)
from fdl_auralizer.config import EngineConfig
from fdl_auralizer.logging import logger
from fdl_auralizer.report import ReportEnvironment
from fdl_auralizer.verify import Grid, VerificationCase, all_passed, run_verification


def bench_report(records: Sequence[TimingRecord], written: Path | None = None) -> str:
    """Sweep summaries (last/first ratio, Spearman rho, real-time count) and the speedup of
    every backend over the first one.
    """
    summaries = [summarize_sweep(group) for group in group_sweeps(records).values()]
    baseline = records[0].backend
    return ReportEnvironment().render(
        "bench",
        summaries=summaries,
        speedups=speedup_ratios(records, baseline),
        baseline=baseline,
        written=written,
    )


def run_bench(
    subject: str,
    sweep: str,
    devices: Sequence[str],
    out_path: Path,
    **fixed,
) -> tuple[list[TimingRecord], str]:
    """Run one sweep per device, one after the other, and write all records to one CSV.

    Args:
        subject (str): "convolver" or "auralizer".
        sweep (str): CLI sweep name, e.g. "block-size".
        devices (Sequence[str]): Backends to time; the first is the speedup baseline.
        out_path (Path): CSV destination.
        **fixed: Remaining `SweepSpec` fields (trials, warmup_trials, rng_seed, block_size,
            channels, filter_length_s, fc_length_s, sample_rate_hz).

    Raises:
        exceptions.BackendUnavailable: When a device is not available here (checked before any
            timing starts).
        exceptions.OutOfMemory: When no configuration of any sweep could run.

    Returns:
        tuple[list[TimingRecord], str]: The records and the summary report.
    """
    parameter = sweep_parameter_name(sweep)
    try:
        specs = [
            SweepSpec(subject, get_backend(device).name, parameter, **fixed)
            for device in dict.fromkeys(devices)
        ]
    except exceptions.FdlAuralizerException as e:
        logger.error("Invalid benchmark request: %s", e)
        raise e

    records: list[TimingRecord] = []
    for spec in specs:
        records.extend(run_sweep(spec))
    if not records:
        raise exceptions.OutOfMemory("No benchmark configuration could be allocated")
    emit_csv(records, out_path)
    return records, bench_report(records, out_path)


def run_process(
    input_path: Path,
    filters_path: Path,
    out_path: Path,
    fc_filters_path: Path | None = None,
    block_size: int = 128,
    device: str = "reference",
    input_gain: float = 1.0,
) -> EngineConfig:
    """Auralize (or convolve) a WAV file; see `fdl_auralizer.audio_io.process_file`."""
    try:
        return process_file(
            input_path,
            filters_path,
            out_path,
            fc_filters_path=fc_filters_path,
            block_size=block_size,
            device=device,
            input_gain=input_gain,
        )
    except exceptions.FdlAuralizerException as e:
        logger.error("Processing %s failed: %s", input_path, e)
        raise e


def run_verify(
    grid: Grid = "small", device: str = "reference"
) -> tuple[bool, list[VerificationCase], str]:
    """Run the verification suites of a grid on one device.

    Returns:
        tuple[bool, list[VerificationCase], str]: Whether all cases passed, the cases, and the
            pass/fail report.
    """
    cases = run_verification(grid, device)
    report = ReportEnvironment().render("verify", cases=cases, device=device)
    return all_passed(cases), cases, report


def list_devices() -> str:
    """Table of the backends detected on this machine."""
    return ReportEnvironment().render("devices", devices=list_backends())
