#!/usr/bin/env python3
"""
Run strong-convergence experiments for the Euler-Maruyama scheme.

Each experiment is one YAML document (see `emrates-lab list` for the
built-in ones). Results are written to the output directory as CSV tables
and a JSON manifest.

---

Examples

Run a built-in experiment on eight cores, failing if the fitted order
misses its acceptance band:

    emrates-lab canned indicator_d1 --workers 8 --assert

Quick smoke run with fewer paths:

    emrates-lab canned ou_oracle --paths 800

Run your own experiment document:

    emrates-lab run my-experiment.yaml --out results/

Summarise every manifest in a results directory:

    emrates-lab report results/

---

Exit codes: 0 success, 2 invalid configuration, 3 budget exceeded,
4 acceptance band missed (with --assert).
"""
import sys
from functools import partial
from pathlib import Path
from textwrap import dedent
from typing import Optional

import click
import structlog
from click import secho as click_secho
from click import style

from emrates._canned import canned as load_canned
from emrates._canned import list_canned
from emrates._coefficients import CoefficientError
from emrates._config import ConfigError, ExperimentConfig, load_config
from emrates._paths import BudgetExceeded, NotNested
from emrates._report import ResultRecord, load_manifests
from emrates._runner import run
from emrates._scheme import (
    DimensionMismatch,
    IncompatibleAssumptions,
    ReferenceGapTooSmall,
)
from emrates.logs import init_logging
from emrates.metrics import RateFitError

# Machine (json) logging.
_LOG = structlog.get_logger()

# Interactive messages for a human go to stderr.
user_message = partial(click_secho, err=True)

EXIT_INVALID = 2
EXIT_BUDGET = 3
EXIT_MISSED = 4

_INVALID = (
    ConfigError,
    CoefficientError,
    IncompatibleAssumptions,
    ReferenceGapTooSmall,
    NotNested,
    DimensionMismatch,
)


@click.group(help=__doc__)
@click.option(
    "--verbose",
    "-v",
    count=True,
    help=dedent(
        """\
        Show info log events (runs starting and finishing, files written), not
        just warnings. Use twice for debug events (each block) too.

        Events are jsonl on stdout, or coloured text on a terminal, unless
        `--event-log-file` is given.
        """
    ),
)
@click.option(
    "-l",
    "--event-log-file",
    help="Output log messages to file, in jsonl format",
    type=click.Path(writable=True, dir_okay=True),
)
def cli(verbose: int, event_log_file: str):
    init_logging(
        open(event_log_file, "a") if event_log_file else None, verbosity=verbose
    )


def _run_options(f):
    options = [
        click.option(
            "--workers",
            "-j",
            type=click.IntRange(min=1),
            default=1,
            help="Number of worker subprocesses (default: 1, in-process)",
        ),
        click.option(
            "--seed",
            type=click.IntRange(min=0, max=2**64 - 1),
            help="Replace the experiment's seed (this changes its fingerprint)",
        ),
        click.option(
            "--out",
            "output_dir",
            type=click.Path(file_okay=False, writable=True),
            default="results",
            show_default=True,
            help="Directory for the result files",
        ),
        click.option(
            "--paths",
            type=click.IntRange(min=1),
            help=dedent(
                """\
                Replace the experiment's path count, for quick smoke runs.

                Must still split into the experiment's batches.
                """
            ),
        ),
        click.option(
            "--assert",
            "assert_acceptance",
            is_flag=True,
            default=False,
            help="Exit with code 4 if the result misses its acceptance band",
        ),
    ]
    for option in reversed(options):
        f = option(f)
    return f


def _fail(code: int, message: str):
    user_message(message, fg="red")
    sys.exit(code)


def _print_record(record: ResultRecord):
    if record.rate is not None:
        for n, error, stderr in zip(
            record.levels, record.errors, record.batch_stderr
        ):
            user_message(f"\t  n={n:<6d} error={error:.6g} ± {stderr:.2g}")
        user_message(f"\torder {style(str(record.rate), bold=True)}")
    for row in record.rows:
        user_message(
            "\t  " + " ".join(f"{k}={v}" for k, v in row.items() if v is not None)
        )

    if record.passed is None:
        verdict = style("reported", fg="blue")
    elif record.passed:
        verdict = style("within", fg="green")
    else:
        verdict = style("outside", fg="red")
    band = f" {record.acceptance}" if record.acceptance else ""
    user_message(
        f"{style(record.name, bold=True)}: {record.headline:.4g} {verdict}{band} "
        f"({record.theorem['citation']}, {record.wall_clock:.1f}s)"
    )


def _execute(
    config: ExperimentConfig,
    workers: int,
    seed: Optional[int],
    output_dir: str,
    paths: Optional[int],
    assert_acceptance: bool,
):
    config = config.with_overrides(
        seed=seed, paths=paths, output_dir=Path(output_dir)
    )
    user_message(
        f"Running {style(config.name, bold=True)} "
        f"({config.kind.value}, {config.paths} paths, {workers} workers)"
    )
    try:
        record = run(config, workers=workers)
    except _INVALID as e:
        _LOG.warning("run.invalid", experiment=config.name, error=str(e))
        _fail(EXIT_INVALID, f"Invalid experiment: {e}")
    except BudgetExceeded as e:
        _LOG.warning("run.budget", experiment=config.name, reason=e.reason)
        _fail(EXIT_BUDGET, f"Budget exceeded: {e.reason}")
    except RateFitError as e:
        _LOG.error("run.unfittable", experiment=config.name, error=str(e))
        _fail(1, f"Can't fit a rate: {e}")

    _print_record(record)
    if assert_acceptance and record.passed is False:
        _fail(
            EXIT_MISSED,
            f"{record.name}: {record.headline:.4g} is outside {record.acceptance}",
        )


@cli.command("run")
@_run_options
@click.argument("config_file", type=click.Path(exists=True, dir_okay=False))
def run_command(config_file: str, **options):
    """Run the experiment in CONFIG_FILE."""
    try:
        config = load_config(config_file)
    except ConfigError as e:
        _fail(EXIT_INVALID, f"Invalid experiment: {e}")
    _execute(config, **options)


@cli.command("canned")
@_run_options
@click.argument("name")
def canned_command(name: str, **options):
    """Run a built-in experiment."""
    try:
        config = load_canned(name)
    except ConfigError as e:
        _fail(EXIT_INVALID, str(e))
    _execute(config, **options)


@cli.command("list")
def list_command():
    """List the built-in experiments and the result each exercises."""
    for name in list_canned():
        config = load_canned(name)
        theorem = config.theorem_ref
        click.echo(f"{name:28s} {config.kind.value:20s} {theorem.citation}")
        click.echo(f"{'':28s} {'':20s} {style(theorem.quote, dim=True)}")


@cli.command("validate")
@click.argument("config_file", type=click.Path(exists=True, dir_okay=False))
def validate_command(config_file: str):
    """Check an experiment document without running it."""
    try:
        config = load_config(config_file).validate()
    except _INVALID as e:
        _fail(EXIT_INVALID, f"Invalid experiment: {e}")
    user_message(f"{config.name} is valid", fg="green")
    click.echo(config.fingerprint)


@cli.command("report")
@click.argument("results_dir", type=click.Path(exists=True, file_okay=False))
def report_command(results_dir: str):
    """Tabulate the manifests in RESULTS_DIR."""
    frame = load_manifests(Path(results_dir))
    if frame.empty:
        _fail(1, f"No manifests found in {results_dir}")
    click.echo(frame.to_string())


if __name__ == "__main__":
    cli()
