"""
Occupation-time quadrature functionals along Brownian paths and the scheme.
"""
import math

import numpy as np
import pytest

from emrates._coefficients import CoefficientError, builtin_diffusion, builtin_drift
from emrates._paths import SeedLineage, generate_lattice
from emrates._scheme import AssumptionProfile, SdeSpec
from emrates.metrics import (
    Statistic,
    WeightKind,
    discrete_linear_variance,
    quadrature_block_sums,
    quadrature_functional,
    quadrature_rate_sweep,
    quadrature_table,
    quadrature_values,
)
from integration_tests.asserts import assert_order_within, assert_within_stderr

HEAVISIDE = dict(pieces=[[0.0, math.inf, 1.0]], alpha=0.24, m=2)


def _linear():
    return builtin_drift("identity")


@pytest.mark.parametrize("n", [16, 64])
def test_linear_terminal_functional_matches_its_exact_variance(n):
    level = 10
    lattice = generate_lattice(1, level, SeedLineage(6, 0), paths=4000)
    sample = quadrature_functional(
        _linear(), lattice, n, p=2, statistic=Statistic.TERMINAL
    )
    exact = math.sqrt(discrete_linear_variance(n, level))
    assert_within_stderr(sample.norm, exact, sample.norm_stderr)
    # The continuum value is only a little larger.
    assert exact == pytest.approx(1 / (math.sqrt(3) * n), rel=0.1)


def test_heaviside_bias_at_the_origin():
    n, level = 4, 8
    lattice = generate_lattice(1, level, SeedLineage(7, 0), paths=4000)
    f = builtin_drift("indicator_interval", **HEAVISIDE)
    values = quadrature_values(f, lattice, n, statistic="terminal")
    ratio = 2**level // n
    # Only the first step sees f(W_0) = 1 at its anchor.
    expected = -(ratio - 1) / (2 * n * ratio)
    stderr = values.std(ddof=1) / math.sqrt(len(values))
    assert_within_stderr(float(values.mean()), expected, stderr)


def test_sup_statistic_dominates_the_terminal_value():
    lattice = generate_lattice(1, 8, SeedLineage(8, 0), paths=50)
    f = builtin_drift("indicator_interval", **HEAVISIDE)
    sup = quadrature_values(f, lattice, 8)
    terminal = quadrature_values(f, lattice, 8, statistic=Statistic.TERMINAL)
    assert (sup >= np.abs(terminal) - 1e-12).all()
    assert (sup >= 0).all()


def test_constant_and_exact_grid_functionals_vanish():
    lattice = generate_lattice(2, 6, SeedLineage(9, 0), paths=10)
    constant = builtin_drift("constant", value=[1.0, 2.0], dimension=2)
    assert not quadrature_values(constant, lattice, 8).any()

    f = builtin_drift("indicator_interval", **HEAVISIDE)
    fine = generate_lattice(1, 6, SeedLineage(9, 0), paths=10)
    # n equal to the lattice resolution: every node is its own anchor.
    assert not quadrature_values(f, fine, 64).any()


def test_weight_multiplies_the_integrand():
    lattice = generate_lattice(1, 8, SeedLineage(10, 0), paths=20)
    f = builtin_drift("indicator_interval", **HEAVISIDE)
    weight = builtin_drift("constant", value=2.0)
    plain = quadrature_functional(f, lattice, 8, p=2, statistic="terminal")
    weighted = quadrature_functional(
        f, lattice, 8, p=2, weight=weight, statistic="terminal"
    )
    assert weighted.weight_kind is WeightKind.FUNCTION
    assert plain.weight_kind is WeightKind.NONE
    assert weighted.values == pytest.approx(2 * plain.values)
    assert weighted.norm == pytest.approx(2 * plain.norm)


def test_driftless_scheme_is_brownian_motion():
    lattice = generate_lattice(1, 8, SeedLineage(11, 0), paths=20)
    f = builtin_drift("indicator_interval", **HEAVISIDE)
    spec = SdeSpec(
        builtin_drift("zero"),
        builtin_diffusion("identity"),
        [0.25],
        AssumptionProfile.ADDITIVE_SOBOLEV,
    )
    along_scheme = quadrature_values(f, lattice, 16, process=spec)
    along_path = quadrature_values(f, lattice, 16, x0=[0.25])
    assert along_scheme.tolist() == along_path.tolist()


def test_sub_interval():
    lattice = generate_lattice(1, 8, SeedLineage(12, 0), paths=20)
    f = builtin_drift("indicator_interval", **HEAVISIDE)
    whole = quadrature_values(f, lattice, 8, statistic="terminal")
    first = quadrature_values(f, lattice, 8, statistic="terminal", interval=(0, 0.5))
    second = quadrature_values(f, lattice, 8, statistic="terminal", interval=(0.5, 1))
    assert first + second == pytest.approx(whole)

    for interval in [(0.5, 0.5), (-0.1, 1), (0, 1.5)]:
        with pytest.raises(ValueError):
            quadrature_values(f, lattice, 8, interval=interval)


def test_time_dependent_integrands():
    lattice = generate_lattice(1, 8, SeedLineage(14, 0), paths=20)
    f = builtin_drift("indicator_interval", **HEAVISIDE)
    plain = quadrature_values(f, lattice, 8, statistic="terminal")

    def steady(t, x):
        return f(x)

    same = quadrature_values(
        steady, lattice, 8, statistic="terminal", time_dependent=True
    )
    assert same.tolist() == plain.tolist()

    def late(t, x):
        # Switched on halfway: the functional over [1/2, 1].
        return (np.asarray(t) >= 0.5)[:, None] * f(x)

    switched = quadrature_values(
        late, lattice, 8, statistic="terminal", time_dependent=True
    )
    second = quadrature_values(f, lattice, 8, statistic="terminal", interval=(0.5, 1))
    assert switched == pytest.approx(second, abs=1e-12)
    assert not np.array_equal(switched, plain)


def test_unbounded_functions_are_refused():
    def identity(x):
        return np.asarray(x, dtype=float)

    unbounded = builtin_drift("custom", function=identity, sup_norm_bound=math.inf)
    lattice = generate_lattice(1, 6, SeedLineage(0, 0))
    with pytest.raises(CoefficientError):
        quadrature_values(unbounded, lattice, 8)
    # Unless it's only ever used against closed forms.
    quadrature_values(_linear(), lattice, 8)


def test_block_sums_add_up_over_paths():
    f = builtin_drift("indicator_interval", **HEAVISIDE)
    lattice = generate_lattice(1, 8, SeedLineage(13, 0), paths=6)
    sums = quadrature_block_sums(f, lattice, (4, 8, 16), 2)
    for i, n in enumerate((4, 8, 16)):
        values = quadrature_values(f, lattice, n)
        assert sums[i] == pytest.approx(float(np.sum(values**2)))


def test_table_is_independent_of_the_block_size():
    f = builtin_drift("indicator_interval", **HEAVISIDE)
    options = dict(batches=4, seed=3, gap=4)
    one = quadrature_table(f, (4, 8, 16), 2, 32, block_size=8, **options)
    other = quadrature_table(f, (4, 8, 16), 2, 32, block_size=2, **options)
    assert one.errors.tolist() == pytest.approx(other.errors.tolist(), rel=1e-12)
    assert one.path_count == 32


def test_heaviside_decays_at_three_quarters():
    f = builtin_drift("indicator_interval", **HEAVISIDE)
    fit = quadrature_rate_sweep(
        f, (4, 8, 16, 32), 2, paths=1600, batches=8, gap=4, seed=20210605
    )
    assert_order_within(fit, 0.5, 1.1)
