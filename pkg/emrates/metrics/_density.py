"""
Density (Krylov-type) bound diagnostic.

For a compactly supported G, |E G(X^n_t)| should stay below a constant times
|G|_{L_p} t^(-d / (2p)). We report the ratio of the two sides on a grid of
times; the constant is never asserted.
"""
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np
import structlog

from emrates._paths import DEFAULT_MEMORY_BUDGET, SeedLineage, generate_lattice
from emrates._scheme import (
    AssumptionProfile,
    IncompatibleAssumptions,
    SdeSpec,
    em_solve,
)

_LOG = structlog.get_logger()

DEFAULT_TIMES = tuple(2.0**-k for k in range(10, 1, -1))


@dataclass(frozen=True)
class IndicatorBump:
    """The indicator of the cube of ``half_width`` around ``center``."""

    center: float = 0.0
    half_width: float = 0.1
    dimension: int = 1

    def __post_init__(self):
        if self.half_width <= 0:
            raise ValueError(f"Bump half-width must be positive: {self.half_width}")

    def __call__(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        inside = np.abs(x - self.center).max(axis=1) <= self.half_width
        return inside.astype(float)

    def lp_norm(self, p: float) -> float:
        """
        >>> IndicatorBump(half_width=0.5, dimension=2).lp_norm(2)
        1.0
        """
        return (2 * self.half_width) ** (self.dimension / p)


@dataclass(frozen=True)
class DensityRow:
    t: float
    expectation: float
    stderr: float
    lp_norm: float
    ratio: float


def _require_assumptions(spec: SdeSpec):
    if (
        spec.profile is AssumptionProfile.ORACLE_ONLY
        or spec.drift.oracle_only
        or spec.diffusion.oracle_only
    ):
        raise IncompatibleAssumptions(
            f"Density bounds need the regular assumptions; "
            f"{spec.drift.name}/{spec.diffusion.name} is oracle-only"
        )


def _time_nodes(times: Sequence[float], n: int) -> np.ndarray:
    nodes = np.rint(np.asarray(times, dtype=float) * n).astype(int)
    if not np.allclose(nodes / n, times) or (nodes < 1).any() or (nodes > n).any():
        raise ValueError(f"Times {list(times)} aren't nodes of a {n}-step grid")
    return nodes


def density_block_sums(
    spec: SdeSpec,
    bump: IndicatorBump,
    times: Sequence[float],
    lattice,
    n: int,
) -> np.ndarray:
    """Sums of G(X^n_t) and G(X^n_t)^2 over one block, shape (2, times)."""
    nodes = _time_nodes(times, n)
    states = em_solve(spec, lattice, n).states
    values = np.stack([bump(states[:, k]) for k in nodes], axis=1)
    return np.stack([values.sum(axis=0), (values**2).sum(axis=0)])


def density_rows(
    sums: np.ndarray,
    paths: int,
    bump: IndicatorBump,
    times: Sequence[float],
    p: float,
) -> List[DensityRow]:
    """Turn accumulated block sums into the diagnostic table."""
    first, second = sums
    mean = first / paths
    variance = np.maximum(second / paths - mean**2, 0.0)
    stderr = np.sqrt(variance / max(paths - 1, 1))
    norm = bump.lp_norm(p)
    return [
        DensityRow(
            t=float(t),
            expectation=float(mean[i]),
            stderr=float(stderr[i]),
            lp_norm=norm,
            ratio=float(abs(mean[i]) / (norm * t ** (-bump.dimension / (2 * p)))),
        )
        for i, t in enumerate(times)
    ]


def density_bound_diagnostic(
    spec: SdeSpec,
    bump: IndicatorBump,
    times: Sequence[float] = DEFAULT_TIMES,
    p: float = 2,
    paths: int = 10_000,
    level: int = 10,
    seed: int = 0,
    n: Optional[int] = None,
    block_size: int = 1000,
    memory_budget: int = DEFAULT_MEMORY_BUDGET,
) -> List[DensityRow]:
    """
    |E G(X^n_t)| / (|G|_{L_p} t^(-d/(2p))) at each of ``times``.

    ``n`` defaults to the lattice resolution 2**level; each time must be a
    node of the n-step grid.
    """
    _require_assumptions(spec)
    if bump.dimension != spec.dimension:
        raise ValueError(
            f"Bump of dimension {bump.dimension} for a {spec.dimension}-d spec"
        )
    n = n or 2**level
    block_size = min(block_size, paths)
    if paths % block_size:
        raise ValueError(f"{paths} paths don't split into blocks of {block_size}")

    sums = np.zeros((2, len(times)))
    for start in range(0, paths, block_size):
        lattice = generate_lattice(
            spec.dimension,
            level,
            SeedLineage(seed, start),
            paths=block_size,
            memory_budget=memory_budget,
        )
        sums += density_block_sums(spec, bump, times, lattice, n)

    rows = density_rows(sums, paths, bump, times, p)
    _LOG.info(
        "density.diagnostic",
        drift=spec.drift.name,
        diffusion=spec.diffusion.name,
        ratios=[r.ratio for r in rows],
        worst=max((r.ratio for r in rows), default=math.nan),
    )
    return rows
