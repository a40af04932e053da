"""
This module manages the Click CLI for fdl-auralizer. It provides a command line interface for the
fdl-auralizer package, which in turn calls "entrypoint" functions from the `core` module.

The parameters used across the CLI commands are defined in the `params` module. Option defaults
may also come from a YAML settings file (`--config`, or `.fdl-auralizer.yml` in the working
directory); explicit flags always win.

Exit codes: 0 on success, 1 on an engine or file error or a failed verification, 2 on a usage
error.
"""

from collections.abc import Iterator, Sequence
from contextlib import contextmanager
from pathlib import Path

import click

from fdl_auralizer import core, exceptions, params
from fdl_auralizer.config import SETTINGS_FILENAME, load_settings
from fdl_auralizer.logging import logger


@contextmanager
def engine_errors() -> Iterator[None]:
    """Report package errors as Click errors (exit code 1)."""
    try:
        yield
    except exceptions.FdlAuralizerException as e:
        raise click.ClickException(f"{type(e).__name__}: {e}") from e


@click.group()
@click.version_option(package_name="fdl-auralizer")
@params.config_path
@click.pass_context
def cli(ctx: click.Context, config_path: Path | None) -> None:
    """Entry point for the fdl-auralizer command line interface."""
    ctx.ensure_object(dict)
    settings_path = config_path or Path(SETTINGS_FILENAME)
    if settings_path.is_file():
        with engine_errors():
            settings = load_settings(settings_path)
        ctx.default_map = {**(ctx.default_map or {}), **settings}
        ctx.obj["SETTINGS_PATH"] = settings_path


@cli.command()
@params.subject
@params.sweep
@params.devices
@params.trials
@params.warmup
@params.seed
@params.csv_out
@params.block_size
@params.channels
@params.filter_length
@params.fc_length
@params.sample_rate
def bench(
    subject: str,
    sweep: str,
    devices: tuple[str, ...],
    trials: int,
    warmup: int,
    seed: int,
    out_path: Path,
    block_size: int,
    channels: int,
    filter_length: float,
    fc_length: float,
    sample_rate: int,
) -> list:
    """Time one block call across a parameter sweep and write the records as CSV.

    Args:
        subject (str): Pipeline to time, passed to --subject.
        sweep (str): Swept parameter, passed to --sweep.
        devices (tuple[str, ...]): Backends passed to --device / -d.
        trials (int): Timed calls per value.
        warmup (int): Untimed calls per value.
        seed (int): Workload seed.
        out_path (Path): CSV path passed to --out / -o.
        block_size (int): Fixed block size.
        channels (int): Fixed output channel count.
        filter_length (float): Fixed synthesis filter length in seconds.
        fc_length (float): Fixed feedback-cancellation filter length in seconds.
        sample_rate (int): Sample rate in Hz.

    Returns:
        list: The timing records.
    """
    with engine_errors():
        records, report = core.run_bench(
            subject,
            sweep,
            devices,
            out_path,
            trials=trials,
            warmup_trials=warmup,
            rng_seed=seed,
            block_size=block_size,
            channels=channels,
            filter_length_s=filter_length,
            fc_length_s=fc_length,
            sample_rate_hz=sample_rate,
        )
    click.echo(report, nl=False)
    return records


@cli.command()
@params.input_path
@params.filters_path
@params.fc_filters_path
@params.block_size
@params.device
@params.wav_out
@params.input_gain
def process(
    input_path: Path,
    filters_path: Path,
    fc_filters_path: Path | None,
    block_size: int,
    device: str,
    out_path: Path,
    input_gain: float,
) -> Path:
    """Auralize a mono WAV file, or only convolve it when no --fc-filters are given.

    Args:
        input_path (Path): Input passed to --in / -i.
        filters_path (Path): Synthesis filters passed to --filters / -f.
        fc_filters_path (Path | None): Feedback-cancellation filters passed to --fc-filters.
        block_size (int): Block size passed to --block-size / -b.
        device (str): Backend passed to --device / -d.
        out_path (Path): Output passed to --out / -o.
        input_gain (float): Input gain passed to --input-gain.

    Returns:
        Path: The written output file.
    """
    with engine_errors():
        cfg = core.run_process(
            input_path,
            filters_path,
            out_path,
            fc_filters_path=fc_filters_path,
            block_size=block_size,
            device=device,
            input_gain=input_gain,
        )
    click.echo(
        f"wrote {out_path} ({cfg.output_channels} channels, n_x={cfg.block_size}, "
        f"{cfg.sample_rate_hz} Hz)"
    )
    return out_path


@cli.command()
@params.grid
@params.device
@click.pass_context
def verify(ctx: click.Context, grid: str, device: str) -> list:
    """Check the engine against the oracle and the closed-loop suites; exit 1 on any failure.

    Args:
        ctx (click.Context): Click context object.
        grid (str): Grid passed to --grid.
        device (str): Backend passed to --device / -d.

    Returns:
        list: The verification cases.
    """
    with engine_errors():
        passed, cases, report = core.run_verify(grid, device)
    click.echo(report, nl=False)
    if not passed:
        logger.error("Verification failed on %s", device)
        ctx.exit(1)
    return cases


@cli.command()
def devices() -> str:
    """List the backends available on this machine."""
    table = core.list_devices()
    click.echo(table, nl=False)
    return table


def cli_main(args: Sequence[str] | None = None) -> int:
    """Run the CLI without exiting the interpreter.

    Args:
        args (Sequence[str] | None, optional): Command line arguments. Defaults to None
            (`sys.argv[1:]`).

    Returns:
        int: Exit code: 0 on success, 1 on failure, 2 on a usage error.
    """
    try:
        result = cli.main(
            args=None if args is None else list(args),
            prog_name="fdl-auralizer",
            standalone_mode=False,
        )
    except click.ClickException as e:
        e.show()
        return e.exit_code
    except click.Abort:
        click.echo("Aborted!", err=True)
        return 1
    return result if isinstance(result, int) and not isinstance(result, bool) else 0
