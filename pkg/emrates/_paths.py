"""
Brownian paths on dyadic grids of [0, 1].

Increments are stored as fixed-point integers ("ticks" of 2**-40). All
coarsening, refinement and prefix sums are integer arithmetic, so a coarse grid
built from a fine one is bitwise identical no matter how the sum is grouped.
The float views (``increments``, ``values``) are exact conversions.

Every variate is addressed by (experiment seed, path index, stream, level,
draw counter) through numpy's counter-based Philox generator, so a path never
depends on which other paths were generated alongside it.
"""
import enum
import math
from dataclasses import dataclass, replace

import numpy as np
import structlog
from scipy.special import ndtri

_LOG = structlog.get_logger()

TICKS_PER_UNIT = 2**40
TICK = 1.0 / TICKS_PER_UNIT

#: Largest lattice (paths * 2**level * dimension entries) we will hold at once.
DEFAULT_MEMORY_BUDGET = 2**25

_U64_MAX = 2**64 - 1
_U32_MAX = 2**32 - 1


class StreamTag(enum.IntEnum):
    """Independent variate streams of one path."""

    INCREMENT = 0
    BRIDGE = 1
    SPOT_CHECK = 2
    MONTE_CARLO = 3


class BudgetExceeded(RuntimeError):
    """A lattice (or a run) would exceed its configured budget."""

    def __init__(self, reason: str, requested=None, budget=None):
        super().__init__(reason)
        self.reason = reason
        self.requested = requested
        self.budget = budget


class NotNested(ValueError):
    """An EM grid that doesn't nest inside the driving lattice."""


@dataclass(frozen=True)
class SeedLineage:
    experiment_seed: int
    path_index: int
    stream_tag: int = StreamTag.INCREMENT

    def __post_init__(self):
        if not 0 <= self.experiment_seed <= _U64_MAX:
            raise ValueError(f"experiment_seed must be a u64: {self.experiment_seed}")
        if not 0 <= self.path_index <= _U64_MAX:
            raise ValueError(f"path_index must be a u64: {self.path_index}")
        if not 0 <= self.stream_tag <= _U32_MAX:
            raise ValueError(f"stream_tag must be a u32: {self.stream_tag}")

    def with_stream(self, tag: int) -> "SeedLineage":
        return replace(self, stream_tag=int(tag))

    def offset(self, paths: int) -> "SeedLineage":
        """The lineage of the path ``paths`` indices further along."""
        return replace(self, path_index=self.path_index + paths)

    def bit_generator(self, level: int = 0) -> np.random.Philox:
        # Key is the path identity. The level and stream live in the counter,
        # leaving the low counter words for the draws themselves.
        return np.random.Philox(
            key=np.array([self.experiment_seed, self.path_index], dtype=np.uint64),
            counter=np.array([0, 0, level, self.stream_tag], dtype=np.uint64),
        )


def standard_normals(lineage: SeedLineage, count: int, level: int = 0) -> np.ndarray:
    """
    ``count`` standard normal variates for one path and stream.

    Uniforms are the top 53 bits of each raw draw, centred in their bucket so
    they lie strictly inside (0, 1), then pushed through the inverse normal CDF.

    >>> a = standard_normals(SeedLineage(7, 3), 4)
    >>> b = standard_normals(SeedLineage(7, 3), 4)
    >>> bool((a == b).all())
    True
    >>> bool((a == standard_normals(SeedLineage(7, 4), 4)).any())
    False
    """
    raw = lineage.bit_generator(level).random_raw(count)
    uniforms = ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53
    return ndtri(uniforms)


def _to_ticks(values: np.ndarray) -> np.ndarray:
    return np.rint(values * TICKS_PER_UNIT).astype(np.int64)


@dataclass(frozen=True, eq=False)
class BrownianLattice:
    """
    A bundle of ``paths`` Brownian paths with 2**level uniform steps on [0, 1].

    ``ticks`` has shape (paths, 2**level, dimension). Path ``i`` of the bundle
    belongs to path index ``lineage.path_index + i``.
    """

    dimension: int
    level: int
    ticks: np.ndarray
    lineage: SeedLineage

    def __post_init__(self):
        expected = (self.ticks.shape[0], 2**self.level, self.dimension)
        if self.ticks.ndim != 3 or self.ticks.shape != expected:
            raise ValueError(
                f"Lattice increments have shape {self.ticks.shape}, expected {expected}"
            )
        self.ticks.setflags(write=False)

    @property
    def paths(self) -> int:
        return self.ticks.shape[0]

    @property
    def steps(self) -> int:
        return 2**self.level

    @property
    def step_size(self) -> float:
        return 2.0**-self.level

    @property
    def path_indices(self) -> np.ndarray:
        return self.lineage.path_index + np.arange(self.paths, dtype=np.uint64)

    @property
    def increments(self) -> np.ndarray:
        return self.ticks * TICK

    def value_ticks(self) -> np.ndarray:
        """Prefix sums in ticks, shape (paths, 2**level + 1, dimension)."""
        out = np.zeros(
            (self.paths, self.steps + 1, self.dimension), dtype=np.int64
        )
        np.cumsum(self.ticks, axis=1, out=out[:, 1:])
        return out

    @property
    def values(self) -> np.ndarray:
        """Path values W at every node k / 2**level, W_0 = 0."""
        return self.value_ticks() * TICK

    def path(self, i: int) -> "BrownianLattice":
        """The single-path lattice of bundle member ``i``."""
        if not 0 <= i < self.paths:
            raise IndexError(f"Path {i} is not in a bundle of {self.paths}")
        return BrownianLattice(
            self.dimension,
            self.level,
            self.ticks[i : i + 1].copy(),
            self.lineage.offset(i),
        )

    def same_path_as(self, other: "BrownianLattice") -> bool:
        """Whether both lattices were drawn for the same paths of one experiment."""
        return (
            self.lineage.experiment_seed == other.lineage.experiment_seed
            and self.lineage.path_index == other.lineage.path_index
            and self.paths == other.paths
            and self.dimension == other.dimension
        )


def _check_budget(paths: int, level: int, dimension: int, memory_budget: int):
    entries = paths * (2**level) * dimension
    if entries > memory_budget:
        raise BudgetExceeded(
            f"Lattice of {paths} paths at level {level} in dimension {dimension} "
            f"needs {entries} entries, over the budget of {memory_budget}",
            requested=entries,
            budget=memory_budget,
        )


def generate_lattice(
    dimension: int,
    level: int,
    lineage: SeedLineage,
    paths: int = 1,
    memory_budget: int = DEFAULT_MEMORY_BUDGET,
) -> BrownianLattice:
    """
    Draw 2**level i.i.d. N(0, 2**-level I) increments for each path.

    >>> lattice = generate_lattice(2, 3, SeedLineage(1, 0))
    >>> lattice.increments.shape
    (1, 8, 2)
    """
    if dimension < 1:
        raise ValueError(f"Dimension must be positive, got {dimension}")
    if level < 0:
        raise ValueError(f"Level must be nonnegative, got {level}")
    if paths < 1:
        raise ValueError(f"Need at least one path, got {paths}")
    _check_budget(paths, level, dimension, memory_budget)

    lineage = lineage.with_stream(StreamTag.INCREMENT)
    scale = math.sqrt(2.0**-level)
    count = (2**level) * dimension
    ticks = np.empty((paths, 2**level, dimension), dtype=np.int64)
    for i in range(paths):
        normals = standard_normals(lineage.offset(i), count, level=level)
        ticks[i] = _to_ticks(normals * scale).reshape(2**level, dimension)

    _LOG.debug(
        "lattice.generate",
        dimension=dimension,
        level=level,
        paths=paths,
        first_path=lineage.path_index,
    )
    return BrownianLattice(dimension, level, ticks, lineage)


def refine(
    lattice: BrownianLattice, memory_budget: int = DEFAULT_MEMORY_BUDGET
) -> BrownianLattice:
    """
    Halve every step with a Brownian bridge midpoint.

    The first half of each increment is drawn from N(dW / 2, h / 4) on the bridge
    stream; the second half is the remainder, so coarsening undoes this exactly.

    >>> lattice = generate_lattice(1, 2, SeedLineage(3, 5))
    >>> fine = refine(lattice)
    >>> fine.level
    3
    >>> bool((coarsen(fine, 2).ticks == lattice.ticks).all())
    True
    """
    level = lattice.level + 1
    _check_budget(lattice.paths, level, lattice.dimension, memory_budget)

    bridge = lattice.lineage.with_stream(StreamTag.BRIDGE)
    spread = math.sqrt(lattice.step_size) / 2
    count = lattice.steps * lattice.dimension
    ticks = np.empty((lattice.paths, lattice.steps, 2, lattice.dimension), np.int64)
    for i in range(lattice.paths):
        coarse = lattice.ticks[i]
        normals = standard_normals(bridge.offset(i), count, level=level)
        first = np.rint(
            coarse / 2 + normals.reshape(coarse.shape) * (spread * TICKS_PER_UNIT)
        ).astype(np.int64)
        ticks[i, :, 0] = first
        ticks[i, :, 1] = coarse - first

    return BrownianLattice(
        lattice.dimension,
        level,
        ticks.reshape(lattice.paths, 2**level, lattice.dimension),
        lattice.lineage,
    )


def coarsen(lattice: BrownianLattice, level: int) -> BrownianLattice:
    """
    Sum consecutive increments down to 2**level steps.

    >>> lattice = generate_lattice(1, 1, SeedLineage(0, 0))
    >>> a, b = lattice.ticks[0, :, 0]
    >>> int(coarsen(lattice, 0).ticks[0, 0, 0]) == a + b
    True
    """
    if level > lattice.level:
        raise ValueError(
            f"Can't coarsen a level {lattice.level} lattice to level {level}"
        )
    if level < 0:
        raise ValueError(f"Level must be nonnegative, got {level}")
    if level == lattice.level:
        return lattice

    ratio = 2 ** (lattice.level - level)
    grouped = lattice.ticks.reshape(lattice.paths, 2**level, ratio, lattice.dimension)
    return BrownianLattice(
        lattice.dimension, level, grouped.sum(axis=2), lattice.lineage
    )


def value_at(lattice: BrownianLattice, k: int) -> np.ndarray:
    """
    W at node ``k``, one row per path of the bundle.

    >>> lattice = generate_lattice(3, 2, SeedLineage(0, 0))
    >>> value_at(lattice, 0)
    array([[0., 0., 0.]])
    """
    if not 0 <= k <= lattice.steps:
        raise IndexError(f"Node {k} is outside 0..{lattice.steps}")
    return lattice.ticks[:, :k].sum(axis=1) * TICK


@dataclass(frozen=True)
class GridMap:
    """
    Anchors of an n-step EM grid on a lattice of 2**level steps.

    >>> grid = GridMap(4, 3)
    >>> float(grid.anchor(0.3))
    0.25
    >>> int(grid.anchor_node(5))
    4
    """

    n: int
    level: int

    def __post_init__(self):
        if self.n < 1 or self.n & (self.n - 1):
            raise NotNested(f"EM step count {self.n} is not a power of two")
        if self.n > 2**self.level:
            raise NotNested(
                f"EM step count {self.n} doesn't nest in a level {self.level} lattice"
            )

    @property
    def log2_n(self) -> int:
        return self.n.bit_length() - 1

    @property
    def ratio(self) -> int:
        """Lattice steps per EM step."""
        return 2**self.level // self.n

    def anchor(self, t):
        """kappa_n(t) = floor(n t) / n."""
        return np.floor(np.multiply(self.n, t)) / self.n

    def anchor_index(self, node):
        """The EM step containing lattice node ``node``."""
        return np.floor_divide(node, self.ratio)

    def anchor_node(self, node):
        """The lattice node at the anchor of ``node``."""
        return self.anchor_index(node) * self.ratio
