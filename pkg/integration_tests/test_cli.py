"""
The emrates-lab command line.
"""
from pathlib import Path

import rapidjson
from ruamel.yaml import YAML

from emrates import lab
from emrates._config import ExperimentConfig


def _write_doc(path: Path, doc) -> Path:
    with path.open("w") as f:
        YAML(typ="safe").dump(doc, f)
    return path


def _manifest(path: Path):
    return rapidjson.loads(path.read_text(), number_mode=rapidjson.NM_NAN)


def test_list(clirunner):
    res = clirunner(lab.cli, ["list"])
    assert "indicator_d1" in res.output
    assert "ou_oracle" in res.output
    assert "Indicators of Lipschitz domains" in res.output


def test_validate(clirunner, tmppath, small_doc):
    path = _write_doc(tmppath / "sweep.yaml", small_doc)
    res = clirunner(lab.cli, ["validate", path])
    assert "small_sweep is valid" in res.output
    assert ExperimentConfig.from_doc(small_doc).fingerprint in res.output


def test_validate_failures_exit_2(clirunner, tmppath, small_doc):
    for name, changes in (
        ("levels", dict(levels=[4, 8])),
        ("gap", dict(reference_gap=2)),
        ("drift", dict(drift=dict(name="nonesuch"))),
        ("theorem", dict(theorem="lemma:density")),
        ("schema", dict(schema_version=0)),
    ):
        doc = dict(small_doc)
        doc.update(changes)
        path = _write_doc(tmppath / f"{name}.yaml", doc)
        res = clirunner(lab.cli, ["validate", path], expect_exit=2)
        assert "Invalid experiment" in res.output


def test_run_writes_results(clirunner, tmppath, small_doc):
    path = _write_doc(tmppath / "sweep.yaml", small_doc)
    out = tmppath / "results"
    res = clirunner(lab.cli, ["run", path, "--out", out])
    assert "small_sweep" in res.output
    assert "n=16" in res.output
    assert (out / "small_sweep.csv").exists()

    manifest = _manifest(out / "small_sweep.manifest.json")
    assert manifest["fingerprint"] == ExperimentConfig.from_doc(small_doc).fingerprint
    assert manifest["passed"] is not None

    res = clirunner(lab.cli, ["report", out])
    assert "small_sweep" in res.output
    assert "rate_sweep" in res.output


def test_seed_and_paths_overrides(clirunner, tmppath, small_doc):
    path = _write_doc(tmppath / "sweep.yaml", small_doc)
    clirunner(lab.cli, ["run", path, "--out", tmppath, "--seed", 99, "--paths", 16])
    manifest = _manifest(tmppath / "small_sweep.manifest.json")
    assert manifest["config"]["seed"] == 99
    assert manifest["path_count"] == 16
    assert manifest["fingerprint"] != ExperimentConfig.from_doc(small_doc).fingerprint


def test_two_workers(clirunner, tmppath, small_doc):
    path = _write_doc(tmppath / "sweep.yaml", small_doc)
    clirunner(lab.cli, ["run", path, "--out", tmppath / "a", "--workers", 1])
    clirunner(lab.cli, ["run", path, "--out", tmppath / "b", "-j", 2])
    assert (tmppath / "a" / "small_sweep.csv").read_bytes() == (
        tmppath / "b" / "small_sweep.csv"
    ).read_bytes()


def test_budget_exceeded_exits_3(clirunner, tmppath, small_doc):
    doc = dict(small_doc, budget_minutes=1e-9)
    path = _write_doc(tmppath / "sweep.yaml", doc)
    res = clirunner(lab.cli, ["run", path, "--out", tmppath], expect_exit=3)
    assert "Budget exceeded" in res.output


def test_missed_band_exits_4_only_when_asserting(clirunner, tmppath, small_doc):
    doc = dict(small_doc, acceptance=dict(minimum=5.0))
    path = _write_doc(tmppath / "sweep.yaml", doc)
    res = clirunner(lab.cli, ["run", path, "--out", tmppath])
    assert "outside" in res.output
    res = clirunner(
        lab.cli, ["run", path, "--out", tmppath, "--assert"], expect_exit=4
    )
    assert "is outside [5, inf]" in res.output


def test_canned(clirunner, tmppath):
    res = clirunner(
        lab.cli, ["canned", "sobolev_indicator", "--out", tmppath, "--assert"]
    )
    assert "within" in res.output
    assert (tmppath / "sobolev_indicator.rows.csv").exists()

    clirunner(
        lab.cli, ["canned", "density_gaussian", "--out", tmppath, "--paths", 800]
    )
    assert (tmppath / "density_gaussian.manifest.json").exists()

    res = clirunner(lab.cli, ["canned", "nonesuch", "--out", tmppath], expect_exit=2)
    assert "no canned experiment" in res.output


def test_event_log_file(clirunner, tmppath, small_doc):
    path = _write_doc(tmppath / "sweep.yaml", small_doc)
    log_file = tmppath / "events.jsonl"
    clirunner(lab.cli, ["-v", "-l", log_file, "run", path, "--out", tmppath])
    events = [
        rapidjson.loads(line, number_mode=rapidjson.NM_NAN)
        for line in log_file.read_text().splitlines()
    ]
    names = [e["event"] for e in events]
    assert "run.start" in names
    assert "run.done" in names
    assert all(e["experiment"] == "small_sweep" for e in events if "run." in e["event"])


def test_report_on_an_empty_directory(clirunner, tmppath):
    res = clirunner(lab.cli, ["report", tmppath], expect_exit=1)
    assert "No manifests" in res.output
