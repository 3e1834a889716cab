from functools import partial
from pathlib import Path
from textwrap import indent
from typing import Dict, List

import pytest
from click.testing import CliRunner
from deepdiff import DeepDiff

from emrates import logs
from emrates._config import ExperimentConfig


def describe_doc_changes(left: Dict, right: Dict) -> List[str]:
    """
    One line per changed field of two config or manifest documents.

    Results here are compared exactly, so a float in the last place counts.
    """
    diff = DeepDiff(left, right)
    out = ["Documents differ:"]
    for kind in ("values_changed", "type_changes"):
        for offset, change in diff.get(kind, {}).items():
            out.append(
                f"  {offset[len('root'):]}: "
                f"{change['old_value']!r} != {change['new_value']!r}"
            )
    for kind, sign in (
        ("dictionary_item_added", "+"),
        ("dictionary_item_removed", "-"),
    ):
        out.extend(f"  {sign} {offset[len('root'):]}" for offset in diff.get(kind, ()))
    return out


def pytest_assertrepr_compare(op, left, right):
    """
    Field-level messages when two large documents differ.
    """

    def is_a_doc(o: object):
        return isinstance(o, dict) and len(repr(o)) > 88

    if op == "==" and is_a_doc(left) and is_a_doc(right):
        return describe_doc_changes(left, right)


@pytest.fixture()
def tmppath(tmpdir):
    return Path(str(tmpdir))


@pytest.fixture()
def clirunner(monkeypatch, pytestconfig):
    # The command points logging at the runner's captured stdout, which is gone
    # once it returns. Loggers must not cache it.
    monkeypatch.setattr(
        "emrates.lab.init_logging",
        partial(logs.init_logging, cache_logger_on_first_use=False),
    )

    def _run_cli(cli_method, opts, catch_exceptions=False, expect_exit=0):
        runner = CliRunner()
        try:
            result = runner.invoke(
                cli_method, [str(o) for o in opts], catch_exceptions=catch_exceptions
            )
        finally:
            logs.init_logging(
                verbosity=max(0, pytestconfig.getoption("verbose")),
                cache_logger_on_first_use=False,
            )
        assert expect_exit == result.exit_code, (
            f"Exit {result.exit_code} for {opts}, expected {expect_exit}. "
            f"Out:\n{indent(result.output, ' ' * 4)}"
        )
        return result

    return _run_cli


# A small additive-noise sweep that runs in well under a second.
SMALL_SWEEP = dict(
    schema_version=1,
    name="small_sweep",
    kind="rate_sweep",
    theorem="corollary:indicator",
    drift=dict(
        name="indicator_interval",
        params=dict(pieces=[[-1.0, 0.0, -1.0], [0.0, 1.0, 1.0]], alpha=0.49, m=2),
    ),
    diffusion=dict(name="identity"),
    x0=[0.0],
    profile="additive_sobolev",
    levels=[4, 8, 16],
    paths=32,
    batches=4,
    block_size=4,
    p=2,
    reference_gap=4,
    seed=11,
    budget_minutes=5,
    acceptance=dict(minimum=0.0),
)


@pytest.fixture()
def small_doc() -> Dict:
    return dict(SMALL_SWEEP)


@pytest.fixture()
def make_config(small_doc):
    """Build a config from the small sweep with some keys replaced."""

    def _make(**changes) -> ExperimentConfig:
        doc = dict(small_doc)
        doc.update(changes)
        return ExperimentConfig.from_doc(doc)

    return _make
