"""
Fractional Sobolev seminorm quadrature against closed forms.
"""
import math

import numpy as np
import pytest

from emrates._coefficients import builtin_drift
from emrates._seminorm import (
    DivergentSeminorm,
    check_interpolation_embedding,
    estimate_sobolev_seminorm,
    interpolation_embedding,
    step_function_seminorm,
)

UNIT_INDICATOR = dict(pieces=[[0.0, 1.0, 1.0]], alpha=0.25, m=2)


def _heaviside(x):
    return (np.asarray(x)[:, 0] >= 0).astype(float)


@pytest.mark.parametrize("alpha", [0.1, 0.25, 0.4])
def test_unit_indicator_closed_form(alpha):
    s = alpha * 2
    assert step_function_seminorm([[0, 1, 1]], alpha, 2) == pytest.approx(
        math.sqrt(4 / (s * (1 - s))), rel=1e-12
    )


def test_step_function_seminorm_scales_with_the_jump():
    one = step_function_seminorm([[0, 1, 1]], 0.25, 2)
    assert step_function_seminorm([[0, 1, -3]], 0.25, 2) == pytest.approx(3 * one)
    assert step_function_seminorm([], 0.25, 2) == 0.0


def test_unit_indicator_estimate_within_two_percent():
    f = builtin_drift("indicator_interval", **UNIT_INDICATOR)
    estimate = estimate_sobolev_seminorm(f, 0.25, 2)
    assert not estimate.divergent
    assert estimate.value == pytest.approx(4.0, rel=0.02)
    assert estimate.quadrature_error_bound < 0.1


def test_two_piece_indicator_matches_closed_form():
    pieces = [[-1.0, 0.0, -1.0], [0.0, 1.0, 1.0]]
    f = builtin_drift("indicator_interval", pieces=pieces, alpha=0.3, m=2)
    estimate = estimate_sobolev_seminorm(f, 0.3, 2)
    assert estimate.value == pytest.approx(f.seminorm_bound, rel=0.02)


@pytest.mark.parametrize(
    "name, params",
    [("indicator_interval", UNIT_INDICATOR), ("hoelder_cusp", dict(beta=0.5))],
)
def test_estimate_is_a_seminorm(name, params):
    f = builtin_drift(name, **params)
    base = estimate_sobolev_seminorm(f, 0.25, 2).value
    assert base > 0

    scaled = estimate_sobolev_seminorm(lambda x: -3 * f(x), 0.25, 2).value
    assert scaled == pytest.approx(3 * base, rel=1e-9)

    shift = 2.5
    moved = estimate_sobolev_seminorm(lambda x: f(x - shift), 0.25, 2, center=[shift])
    assert moved.value == pytest.approx(base, rel=1e-6)

    g = builtin_drift("indicator_interval", pieces=[[0.5, 2.0, 1.0]], alpha=0.25, m=2)
    other = estimate_sobolev_seminorm(g, 0.25, 2).value
    both = estimate_sobolev_seminorm(lambda x: f(x) + g(x), 0.25, 2).value
    assert both <= base + other


@pytest.mark.parametrize("alpha, m", [(0.5, 2), (0.75, 2), (0.4, 3)])
def test_divergence_at_or_beyond_the_critical_order(alpha, m):
    estimate = estimate_sobolev_seminorm(_heaviside, alpha, m)
    assert estimate.divergent
    assert estimate.value == math.inf
    with pytest.raises(DivergentSeminorm):
        estimate.require_finite()


def test_smooth_functions_are_never_divergent():
    bump = builtin_drift("hoelder_cusp", beta=1.0)
    estimate = estimate_sobolev_seminorm(bump, 0.5, 2)
    assert not estimate.divergent
    assert estimate.local_exponent > 1.5
    assert estimate.value > 0


def test_constant_function_has_zero_seminorm():
    constant = builtin_drift("constant", value=3.0)
    estimate = estimate_sobolev_seminorm(constant, 0.25, 2)
    assert estimate.value == 0.0
    assert not estimate.divergent


@pytest.mark.parametrize(
    "name, params, alpha, m",
    [
        ("indicator_interval", UNIT_INDICATOR, 0.25, 2),
        (
            "indicator_interval",
            dict(pieces=[[-1.0, 0.0, -1.0], [0.0, 1.0, 1.0]], alpha=0.3, m=2),
            0.3,
            2,
        ),
        ("hoelder_cusp", dict(beta=0.5), 0.4, 2),
        ("zero", {}, 0.25, 2),
    ],
)
@pytest.mark.parametrize("theta", [0.25, 0.5, 0.75])
def test_interpolation_inequality_holds(name, params, alpha, m, theta):
    f = builtin_drift(name, **params)
    if name == "zero":
        # Both sides vanish.
        assert check_interpolation_embedding(f, alpha, m, theta)
        return
    check = interpolation_embedding(f, alpha, m, theta)
    assert check.holds, f"{check.inner.value} > {check.bound}"
    assert check.inner.alpha == pytest.approx(alpha * theta)
    assert check.inner.m == pytest.approx(m / theta)


def test_two_dimensional_indicator_is_finite_below_the_critical_order():
    disc = builtin_drift(
        "indicator_lipschitz_domain", dimension=2, radius=1.0, alpha=0.25, m=2
    )
    estimate = estimate_sobolev_seminorm(disc, 0.25, 2, component=0)
    assert not estimate.divergent
    assert math.isfinite(estimate.value) and estimate.value > 0


def test_embedding_needs_a_bounded_function():
    ou = builtin_drift("linear_ou", theta=1.0)
    with pytest.raises(ValueError, match="sup-norm"):
        interpolation_embedding(ou, 0.25, 2, 0.5)
    with pytest.raises(ValueError):
        interpolation_embedding(ou, 0.25, 2, 1.5, sup_norm=1.0)


def test_estimator_argument_ranges():
    f = builtin_drift("indicator_interval", **UNIT_INDICATOR)
    with pytest.raises(ValueError):
        estimate_sobolev_seminorm(f, 1.0, 2)
    with pytest.raises(ValueError):
        estimate_sobolev_seminorm(f, 0.25, 0.5)
    with pytest.raises(ValueError, match="dimensions 1 and 2"):
        estimate_sobolev_seminorm(f, 0.25, 2, dimension=3)
