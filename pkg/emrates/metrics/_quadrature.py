"""
Occupation-time quadrature functionals.

For a process U on a fine lattice, the EM grid of n steps and a function f,

    sum over fine nodes r of g(U_r) (f(U_r) - f(U_kappa(r))) h

is the left-point Riemann sum of the discretisation error of the time integral
of f along U. ``U`` is either Brownian motion started at x0, or the EM
interpolation of an SDE driven by the same lattice.

A time-dependent f is evaluated at the fine node's time r at both points:
f(r, U_r) - f(r, U_kappa(r)).
"""
import math
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np
import structlog

from emrates._coefficients import CoefficientError
from emrates._paths import (
    DEFAULT_MEMORY_BUDGET,
    BrownianLattice,
    GridMap,
    SeedLineage,
    generate_lattice,
)
from emrates._scheme import DEFAULT_REFERENCE_GAP, SdeSpec, em_solve
from emrates.metrics._model import (
    ErrorTable,
    QuadratureSample,
    RateFit,
    Statistic,
    WeightKind,
    empirical_norm,
)
from emrates.metrics._rates import fit_rate

_LOG = structlog.get_logger()

BROWNIAN = "brownian"

Process = Union[str, SdeSpec]


def _require_bounded(f: Callable):
    sup = getattr(f, "sup_norm_bound", None)
    if sup is None or math.isfinite(sup) or getattr(f, "oracle_only", False):
        return
    raise CoefficientError(
        f"Quadrature needs a bounded function; {getattr(f, 'name', f)!r} is not"
    )


def _columns(values: np.ndarray, count: int) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    return values.reshape(count, -1)


def _process_values(
    process: Process, lattice: BrownianLattice, n: int, x0
) -> np.ndarray:
    if isinstance(process, SdeSpec):
        return em_solve(process, lattice, n, dense=True).fine_values()
    if process != BROWNIAN:
        raise ValueError(f"Unknown process {process!r}")
    start = np.zeros(lattice.dimension) if x0 is None else np.asarray(x0, float)
    return start + lattice.values


def _interval_nodes(interval: Tuple[float, float], level: int) -> Tuple[int, int]:
    s, t = interval
    if not 0 <= s < t <= 1:
        raise ValueError(f"Interval must satisfy 0 <= s < t <= 1, got {interval}")
    steps = 2**level
    return math.ceil(s * steps), math.ceil(t * steps)


def quadrature_values(
    f: Callable,
    lattice: BrownianLattice,
    n: int,
    weight: Optional[Callable] = None,
    process: Process = BROWNIAN,
    x0=None,
    statistic: Statistic = Statistic.SUP,
    interval: Tuple[float, float] = (0.0, 1.0),
    time_dependent: bool = False,
) -> np.ndarray:
    """
    The functional's value for every path of ``lattice``.

    With ``time_dependent``, f is called as f(t, points) with one time per point.
    """
    _require_bounded(f)
    grid = GridMap(n, lattice.level)
    statistic = Statistic(statistic)
    first, last = _interval_nodes(interval, lattice.level)

    u = _process_values(process, lattice, n, x0)
    paths, _, d = u.shape
    nodes = np.arange(first, last)
    here = u[:, nodes].reshape(-1, d)
    anchored = u[:, grid.anchor_node(nodes)].reshape(-1, d)

    count = len(here)
    if time_dependent:
        times = np.tile(nodes * lattice.step_size, paths)
        integrand = _columns(f(times, here), count) - _columns(
            f(times, anchored), count
        )
    else:
        integrand = _columns(f(here), count) - _columns(f(anchored), count)
    if weight is not None:
        integrand = integrand * _columns(weight(here), count)
    integrand = integrand.reshape(paths, len(nodes), -1) * lattice.step_size

    if statistic is Statistic.TERMINAL:
        total = integrand.sum(axis=1)
        if total.shape[1] == 1:
            return total[:, 0]
        return np.linalg.norm(total, axis=1)

    running = np.cumsum(integrand, axis=1)
    return np.linalg.norm(running, axis=2).max(axis=1)


def quadrature_functional(
    f: Callable,
    lattice: BrownianLattice,
    n: int,
    p: float,
    weight: Optional[Callable] = None,
    process: Process = BROWNIAN,
    x0=None,
    statistic: Statistic = Statistic.SUP,
    interval: Tuple[float, float] = (0.0, 1.0),
    time_dependent: bool = False,
) -> QuadratureSample:
    """
    The quadrature functional for each path of ``lattice`` with its empirical
    L_p norm.

    >>> from emrates._paths import generate_lattice, SeedLineage
    >>> lattice = generate_lattice(1, 8, SeedLineage(0, 0), paths=4)
    >>> constant = lambda x: np.ones(len(x))
    >>> quadrature_functional(constant, lattice, 16, p=2).norm
    0.0
    """
    statistic = Statistic(statistic)
    values = quadrature_values(
        f,
        lattice,
        n,
        weight,
        process,
        x0,
        statistic,
        tuple(interval),
        time_dependent,
    )
    return QuadratureSample(
        n=n,
        p=p,
        weight_kind=WeightKind.NONE if weight is None else WeightKind.FUNCTION,
        values=values,
        norm=empirical_norm(values, p),
        statistic=statistic,
        interval=tuple(interval),
    )


def discrete_linear_variance(n: int, level: int) -> float:
    """
    Exact variance of the terminal functional for f(x) = x over Brownian paths
    on a lattice of 2**level steps.

    Tends to 1 / (3 n^2) as the lattice is refined.

    >>> round(discrete_linear_variance(16, 30) * 3 * 16**2, 6)
    1.0
    """
    grid = GridMap(n, level)
    r = grid.ratio
    h = 2.0**-level
    return n * h**3 * (r - 1) * r * (2 * r - 1) / 6


def quadrature_block_sums(
    f: Callable,
    lattice: BrownianLattice,
    levels: Sequence[int],
    p: float,
    **options,
) -> np.ndarray:
    """Sum of |functional|^p over the paths of one block, at each level."""
    return np.array(
        [
            float(np.sum(np.abs(quadrature_values(f, lattice, n, **options)) ** p))
            for n in levels
        ]
    )


def quadrature_table(
    f: Callable,
    levels: Sequence[int],
    p: float,
    paths: int,
    batches: int = 8,
    seed: int = 0,
    gap: int = DEFAULT_REFERENCE_GAP,
    block_size: Optional[int] = None,
    memory_budget: int = DEFAULT_MEMORY_BUDGET,
    **options,
) -> ErrorTable:
    """
    Empirical L_p norms of the functional at each level, with batch replicates.

    Lattices are drawn at ``gap`` levels above the finest EM grid, one block
    of paths at a time.
    """
    if paths % batches:
        raise ValueError(f"{paths} paths don't split into {batches} batches")
    batch_paths = paths // batches
    block_size = block_size or batch_paths
    if batch_paths % block_size:
        raise ValueError(
            f"Batches of {batch_paths} paths don't split into blocks of {block_size}"
        )
    process = options.get("process", BROWNIAN)
    if isinstance(process, SdeSpec):
        dimension = process.dimension
    else:
        dimension = getattr(f, "dimension", 1)
    level = max(levels).bit_length() - 1 + gap

    blocks = paths // block_size
    sums = np.empty((blocks, len(levels)))
    for block in range(blocks):
        lattice = generate_lattice(
            dimension,
            level,
            SeedLineage(seed, block * block_size),
            paths=block_size,
            memory_budget=memory_budget,
        )
        sums[block] = quadrature_block_sums(f, lattice, levels, p, **options)

    return ErrorTable.from_block_sums(
        levels, p, sums, block_size, batch_paths // block_size
    )


def quadrature_rate_sweep(
    f: Callable,
    levels: Sequence[int],
    p: float,
    paths: int,
    process: Process = BROWNIAN,
    **options,
) -> RateFit:
    """Fitted decay order of the functional's L_p norm across ``levels``."""
    table = quadrature_table(f, levels, p, paths, process=process, **options)
    fit = fit_rate(table)
    _LOG.info(
        "quadrature.sweep",
        levels=list(levels),
        norms=table.errors,
        order=fit.order,
    )
    return fit
