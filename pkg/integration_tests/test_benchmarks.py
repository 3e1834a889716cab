"""
Timings of the hot loops: lattice generation and the scheme itself.
"""
from emrates._coefficients import builtin_diffusion, builtin_drift
from emrates._paths import SeedLineage, coarsen, generate_lattice
from emrates._scheme import AssumptionProfile, SdeSpec, em_solve


def test_generate_lattice(benchmark):
    lattice = benchmark(lambda: generate_lattice(1, 14, SeedLineage(1, 0), paths=64))
    assert lattice.values.shape[0] == 64


def test_coarsen(benchmark):
    lattice = generate_lattice(1, 14, SeedLineage(1, 0), paths=64)
    coarse = benchmark(lambda: coarsen(lattice, 6))
    assert coarse.level == 6


def test_em_solve_indicator(benchmark):
    spec = SdeSpec(
        builtin_drift(
            "indicator_interval",
            pieces=[[-1.0, 0.0, -1.0], [0.0, 1.0, 1.0]],
            alpha=0.49,
            m=2,
        ),
        builtin_diffusion("identity"),
        [0.0],
        AssumptionProfile.ADDITIVE_SOBOLEV,
    )
    lattice = generate_lattice(1, 12, SeedLineage(2, 0), paths=256)
    trajectory = benchmark(lambda: em_solve(spec, lattice, 1024))
    assert trajectory.states.shape[:2] == (256, 1025)
