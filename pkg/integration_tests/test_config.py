"""
Experiment documents: parsing, validation and fingerprints.
"""
from pathlib import Path

import pytest
from ruamel.yaml import YAML

from emrates._config import (
    Acceptance,
    ConfigError,
    ExperimentConfig,
    ExperimentKind,
    load_config,
)
from emrates._scheme import (
    AssumptionProfile,
    IncompatibleAssumptions,
    ReferenceGapTooSmall,
)


def test_small_sweep_parses(make_config):
    config = make_config().validate()
    assert config.kind is ExperimentKind.RATE_SWEEP
    assert config.profile is AssumptionProfile.ADDITIVE_SOBOLEV
    assert config.levels == (4, 8, 16)
    assert config.x0 == (0.0,)
    assert config.batch_paths == 8
    assert config.effective_block_size == 4
    # Finest level 16 = 2^4, plus the gap.
    assert config.reference_level == 8
    assert config.acceptance == Acceptance(minimum=0.0)
    assert config.build_spec().drift.name == "indicator_interval"


@pytest.mark.parametrize(
    "changes, key",
    [
        (dict(schema_version=2), "schema_version"),
        (dict(colour="blue"), None),
        (dict(kind="marathon"), "kind"),
        (dict(profile="pink_noise"), "profile"),
        (dict(drift=dict(params={})), "drift"),
        (dict(drift=dict(name="zero", flavour=1)), "drift"),
        (dict(acceptance=dict(minimum=0.1, ideal=0.5)), "acceptance"),
        (dict(sobolev=dict(alpha=0.5, m=2, shape="round")), "sobolev"),
        (dict(quadrature=[1, 2]), "quadrature"),
    ],
)
def test_malformed_documents(make_config, changes, key):
    with pytest.raises(ConfigError) as got:
        make_config(**changes)
    assert got.value.key == key


def test_missing_required_key(small_doc):
    del small_doc["theorem"]
    with pytest.raises(ConfigError, match="theorem"):
        ExperimentConfig.from_doc(small_doc)


def test_fingerprint_is_stable_and_ignores_run_limits(make_config):
    config = make_config()
    assert config.fingerprint == make_config().fingerprint
    assert len(config.fingerprint) == 64

    assert make_config(budget_minutes=1).fingerprint == config.fingerprint
    assert make_config(memory_budget=2**20).fingerprint == config.fingerprint
    # 2 and 2.0 are the same document.
    assert make_config(p=2.0).fingerprint == config.fingerprint

    assert make_config(seed=12).fingerprint != config.fingerprint
    assert make_config(paths=64).fingerprint != config.fingerprint


def test_fingerprint_ignores_the_output_dir(make_config, tmppath):
    config = make_config()
    assert config.with_overrides(output_dir=tmppath).fingerprint == config.fingerprint


def test_to_doc_round_trips(make_config):
    config = make_config()
    again = ExperimentConfig.from_doc(config.to_doc())
    assert again.to_doc() == config.to_doc()
    assert again.fingerprint == config.fingerprint


@pytest.mark.parametrize(
    "changes, message",
    [
        (dict(levels=[4, 8]), "three levels"),
        (dict(levels=[4, 6, 8]), "powers of two"),
        (dict(levels=[4, 16, 8]), "increasing"),
        (dict(paths=30), "batches"),
        (dict(block_size=3), "blocks"),
        (dict(p=0), "positive"),
        (dict(seed=-1), "u64"),
        (dict(theorem="theorem:unknown"), "unknown theorem"),
    ],
)
def test_invalid_settings(make_config, changes, message):
    with pytest.raises(ConfigError, match=message):
        make_config(**changes).validate()


def test_reference_gap_has_a_floor(make_config):
    with pytest.raises(ReferenceGapTooSmall):
        make_config(reference_gap=3).validate()


@pytest.mark.parametrize(
    "changes",
    [
        # Additive result in a multiplicative experiment.
        dict(
            profile="multiplicative",
            diffusion=dict(name="sine_elliptic"),
        ),
        # A rate result can't back a density diagnostic.
        dict(kind="density_diagnostic"),
        # The unbounded OU drift only runs against its closed form.
        dict(drift=dict(name="linear_ou"), theorem="oracle:classical"),
    ],
)
def test_incompatible_assumptions(make_config, changes):
    with pytest.raises(IncompatibleAssumptions):
        make_config(**changes).validate()


def test_oracle_validation_needs_a_closed_form(make_config):
    with pytest.raises(ConfigError, match="closed-form"):
        make_config(kind="oracle_validation", theorem="oracle:classical").validate()

    make_config(
        kind="oracle_validation",
        theorem="oracle:classical",
        drift=dict(name="linear_ou", params=dict(theta=1.0)),
        profile="oracle_only",
    ).validate()


def test_sobolev_estimate_needs_its_section(make_config):
    with pytest.raises(ConfigError, match="sobolev section"):
        make_config(kind="sobolev_estimate", theorem="lemma:interpolation").validate()


def test_quadrature_process_is_checked(make_config):
    with pytest.raises(ConfigError, match="process"):
        make_config(
            kind="quadrature_sweep",
            theorem="lemma:quadrature_additive",
            quadrature=dict(process="levy"),
        ).validate()


def test_overrides(make_config, tmppath):
    config = make_config()
    smaller = config.with_overrides(seed=3, paths=16, output_dir=str(tmppath))
    assert (smaller.seed, smaller.paths) == (3, 16)
    assert smaller.output_dir == tmppath
    # Batches of 4 paths still hold blocks of 4.
    assert smaller.block_size == 4
    smaller.validate()

    tiny = make_config(block_size=8).with_overrides(paths=16)
    assert tiny.block_size is None
    tiny.validate()

    assert config.with_overrides() == config


def test_load_config(tmppath: Path, small_doc):
    path = tmppath / "sweep.yaml"
    with path.open("w") as f:
        YAML(typ="safe").dump(small_doc, f)
    config = load_config(path, output_dir=tmppath)
    assert config.name == "small_sweep"
    assert config.output_dir == tmppath

    with pytest.raises(ConfigError, match="can't read"):
        load_config(tmppath / "missing.yaml")

    broken = tmppath / "broken.yaml"
    broken.write_text("levels: [4, 8\n")
    with pytest.raises(ConfigError, match="not a valid YAML"):
        load_config(broken)


def test_acceptance_rejects_nan():
    assert not Acceptance(minimum=0.0).verdict(float("nan"))
    assert str(Acceptance(maximum=1.0)) == "[-inf, 1]"
