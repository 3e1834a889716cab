"""
Density bound diagnostic: E G(X_t) for small indicator bumps.
"""
import math

import numpy as np
import pytest
from scipy.special import erf

from emrates._coefficients import builtin_diffusion, builtin_drift
from emrates._scheme import AssumptionProfile, IncompatibleAssumptions, SdeSpec
from emrates.metrics import IndicatorBump, density_bound_diagnostic, density_rows
from integration_tests.asserts import assert_within_stderr

TIMES = (2.0**-8, 2.0**-4, 2.0**-2)


def _brownian(dimension=1):
    return SdeSpec(
        builtin_drift("zero", dimension=dimension),
        builtin_diffusion("identity", dimension=dimension),
        [0.0] * dimension,
        AssumptionProfile.ADDITIVE_SOBOLEV,
    )


def test_bump_is_a_closed_cube():
    bump = IndicatorBump(center=1.0, half_width=0.5, dimension=2)
    values = bump([[1.0, 1.0], [1.5, 0.5], [1.5, 1.6], [0.0, 1.0]])
    assert values.tolist() == [1.0, 1.0, 0.0, 0.0]
    assert bump.lp_norm(1) == pytest.approx(1.0)
    assert IndicatorBump(half_width=0.1).lp_norm(2) == pytest.approx(math.sqrt(0.2))

    with pytest.raises(ValueError):
        IndicatorBump(half_width=0.0)


def test_brownian_expectation_is_the_gaussian_mass():
    bump = IndicatorBump(half_width=0.1)
    rows = density_bound_diagnostic(
        _brownian(), bump, TIMES, paths=4000, level=8, seed=3, block_size=1000
    )
    assert [r.t for r in rows] == list(TIMES)
    for row in rows:
        # P(|W_t| <= h)
        exact = erf(0.1 / math.sqrt(2 * row.t))
        assert_within_stderr(row.expectation, exact, row.stderr)
        assert row.lp_norm == pytest.approx(math.sqrt(0.2))
        assert row.ratio == pytest.approx(
            row.expectation / (row.lp_norm * row.t**-0.25)
        )


def test_rows_do_not_depend_on_block_size():
    bump = IndicatorBump(half_width=0.2)
    whole, split = (
        density_bound_diagnostic(
            _brownian(), bump, TIMES, paths=800, level=8, seed=5, block_size=size
        )
        for size in (800, 200)
    )
    assert [r.expectation for r in split] == pytest.approx(
        [r.expectation for r in whole], rel=1e-12
    )


def test_multiplicative_two_dimensional_run():
    spec = SdeSpec(
        builtin_drift("indicator_lipschitz_domain", dimension=2),
        builtin_diffusion("sine_elliptic", dimension=2),
        [0.0, 0.0],
        AssumptionProfile.MULTIPLICATIVE,
    )
    rows = density_bound_diagnostic(
        spec,
        IndicatorBump(half_width=0.25, dimension=2),
        TIMES,
        paths=400,
        level=8,
        seed=1,
        block_size=200,
    )
    for row in rows:
        assert 0.0 <= row.expectation <= 1.0
        assert np.isfinite(row.ratio)


def test_rows_from_hand_made_sums():
    bump = IndicatorBump(half_width=0.5)
    # Ten paths; three of them inside the bump at t = 1/4.
    (row,) = density_rows(np.array([[3.0], [3.0]]), 10, bump, [0.25], p=1)
    assert row.expectation == pytest.approx(0.3)
    assert row.stderr == pytest.approx(math.sqrt(0.21 / 9))
    assert row.ratio == pytest.approx(0.3 / 0.25**-0.5)


def test_oracle_only_specs_are_refused():
    spec = SdeSpec(
        builtin_drift("linear_ou"),
        builtin_diffusion("identity"),
        [0.0],
        AssumptionProfile.ORACLE_ONLY,
    )
    with pytest.raises(IncompatibleAssumptions):
        density_bound_diagnostic(spec, IndicatorBump(), TIMES, paths=10, level=8)


def test_bad_times_and_dimensions():
    with pytest.raises(ValueError, match="nodes"):
        density_bound_diagnostic(
            _brownian(), IndicatorBump(), [0.3], paths=10, level=8
        )
    with pytest.raises(ValueError, match="dimension"):
        density_bound_diagnostic(
            _brownian(), IndicatorBump(dimension=2), TIMES, paths=10, level=8
        )
    with pytest.raises(ValueError, match="blocks"):
        density_bound_diagnostic(
            _brownian(), IndicatorBump(), TIMES, paths=10, level=8, block_size=4
        )
