"""
Strong error between coupled trajectories.
"""
from typing import Sequence

import numpy as np
import structlog

from emrates._paths import BrownianLattice
from emrates._scheme import SdeSpec, Trajectory, em_solve, reference_solution

_LOG = structlog.get_logger()


class CouplingViolation(ValueError):
    """Trajectories (or grids) that weren't driven by the same Brownian paths."""


def _check_coupled(reference: Trajectory, approx: Trajectory):
    if reference.lineage != approx.lineage:
        raise CouplingViolation(
            f"Trajectories come from different paths: "
            f"{reference.lineage} vs {approx.lineage}"
        )
    if reference.level != approx.level or reference.paths != approx.paths:
        raise CouplingViolation(
            f"Trajectories were solved on different lattices: "
            f"level {reference.level} with {reference.paths} paths vs "
            f"level {approx.level} with {approx.paths} paths"
        )


def path_errors(reference: Trajectory, approx: Trajectory, p: float) -> np.ndarray:
    """
    sup over lattice nodes of |X^ref - X^n|, raised to p, for each path.
    """
    if p <= 0:
        raise ValueError(f"Moment exponent must be positive, got {p}")
    _check_coupled(reference, approx)
    gap = reference.fine_values() - approx.fine_values()
    return np.linalg.norm(gap, axis=2).max(axis=1) ** p


def strong_error(reference: Trajectory, approx: Trajectory, p: float) -> float:
    """
    (mean over paths of sup_t |X^ref_t - X^n_t|^p)^(1/p).
    """
    return float(path_errors(reference, approx, p).mean() ** (1 / p))


def error_block_sums(
    spec: SdeSpec,
    lattice: BrownianLattice,
    levels: Sequence[int],
    p: float,
    minimum_gap: int,
) -> np.ndarray:
    """
    Sum of path contributions at each level for one block of paths.

    The reference is solved once on the lattice; every level is a coarsening
    of the same lattice.
    """
    max_level = max(levels).bit_length() - 1
    reference = reference_solution(spec, lattice, max_level, minimum_gap=minimum_gap)
    sums = np.empty(len(levels))
    for i, n in enumerate(levels):
        approx = em_solve(spec, lattice, n, dense=True)
        sums[i] = path_errors(reference, approx, p).sum()
    _LOG.debug(
        "errors.block",
        first_path=lattice.lineage.path_index,
        paths=lattice.paths,
        exact=reference.exact,
    )
    return sums
