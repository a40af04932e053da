"""This module contains Click CLI-specific parameters for use with the fdl-auralizer CLI commands.
"""

from pathlib import Path

import click

from fdl_auralizer.bench import SUBJECTS
from fdl_auralizer.config import DEFAULT_BLOCK_SIZE, DEFAULT_SAMPLE_RATE_HZ

config_path = click.option(
    "--config",
    "-c",
    "config_path",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    help="YAML settings file with option defaults per subcommand (default: .fdl-auralizer.yml).",
    default=None,
)

device = click.option(
    "--device",
    "-d",
    type=str,
    help="Backend to run on: reference, parallel (alias cpu) or accelerator (alias gpu).",
    default="reference",
    show_default=True,
)

devices = click.option(
    "--device",
    "-d",
    "devices",
    type=str,
    help="Backend to time; repeat to compare backends against the first one.",
    multiple=True,
    default=("reference",),
    show_default=True,
)

block_size = click.option(
    "--block-size",
    "-b",
    type=int,
    help="Block size n_x in samples (power of two in [16, 8192]).",
    default=DEFAULT_BLOCK_SIZE,
    show_default=True,
)

sample_rate = click.option(
    "--sample-rate",
    type=int,
    help="Sample rate in Hz.",
    default=DEFAULT_SAMPLE_RATE_HZ,
    show_default=True,
)

subject = click.option(
    "--subject",
    type=click.Choice(SUBJECTS),
    help="Pipeline to time: the synthesis convolver alone or the full auralizer.",
    default="convolver",
    show_default=True,
)

sweep = click.option(
    "--sweep",
    type=click.Choice(["block-size", "filter-length", "channels", "fc-length"]),
    help="Parameter to sweep over its standard range.",
    required=True,
)

trials = click.option(
    "--trials",
    type=click.IntRange(min=1),
    help="Timed block calls per swept value.",
    default=10000,
    show_default=True,
)

warmup = click.option(
    "--warmup",
    type=click.IntRange(min=1),
    help="Untimed block calls before timing.",
    default=100,
    show_default=True,
)

seed = click.option(
    "--seed",
    type=int,
    help="Seed of the random filters and inputs.",
    default=0,
    show_default=True,
)

channels = click.option(
    "--channels",
    type=click.IntRange(min=1),
    help="Output channel count C_out when it is not swept.",
    default=32,
    show_default=True,
)

filter_length = click.option(
    "--filter-length",
    type=click.FloatRange(min=0, min_open=True),
    help="Synthesis filter length in seconds when it is not swept.",
    default=10.0,
    show_default=True,
)

fc_length = click.option(
    "--fc-length",
    type=click.FloatRange(min=0, min_open=True),
    help="Feedback-cancellation filter length in seconds when it is not swept.",
    default=1.0,
    show_default=True,
)

csv_out = click.option(
    "--out",
    "-o",
    "out_path",
    type=click.Path(dir_okay=False, path_type=Path),
    help="CSV file to write the timing records to.",
    required=True,
)

input_path = click.option(
    "--in",
    "-i",
    "input_path",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    help="Mono 32-bit float WAV input.",
    required=True,
)

filters_path = click.option(
    "--filters",
    "-f",
    "filters_path",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    help="Synthesis filters: 32-bit float WAV, or raw f32le with a <file>.yml sidecar.",
    required=True,
)

fc_filters_path = click.option(
    "--fc-filters",
    "fc_filters_path",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    help="Feedback-cancellation filters; without them the input is only convolved.",
    default=None,
)

wav_out = click.option(
    "--out",
    "-o",
    "out_path",
    type=click.Path(dir_okay=False, path_type=Path),
    help="C_out-channel 32-bit float WAV output.",
    required=True,
)

input_gain = click.option(
    "--input-gain",
    type=float,
    help="Gain applied to the microphone input.",
    default=1.0,
    show_default=True,
)

grid = click.option(
    "--grid",
    type=click.Choice(["small", "full"]),
    help="Verification grid: small (quick) or full (adds n_x=128, long filters, more seeds).",
    default="small",
    show_default=True,
)
