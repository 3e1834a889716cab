import enum
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
import structlog

_LOG = structlog.get_logger()


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and not n & (n - 1)


@dataclass(frozen=True, eq=False)
class ErrorTable:
    """
    Empirical strong errors, one per EM step count.

    ``errors[i]`` is the p-th root of the mean of the path contributions at
    ``levels[i]`` over all ``path_count`` paths. ``batch_errors`` has one row
    per batch, each computed the same way over that batch alone.
    """

    levels: Tuple[int, ...]
    p: float
    errors: np.ndarray
    batch_errors: np.ndarray
    path_count: int
    batch_count: int

    def __post_init__(self):
        object.__setattr__(self, "levels", tuple(int(n) for n in self.levels))
        errors = np.asarray(self.errors, dtype=float)
        batch_errors = np.asarray(self.batch_errors, dtype=float).reshape(
            self.batch_count, len(self.levels)
        )
        object.__setattr__(self, "errors", errors)
        object.__setattr__(self, "batch_errors", batch_errors)

        if not all(_is_power_of_two(n) for n in self.levels):
            raise ValueError(f"Levels must be powers of two: {self.levels}")
        if any(a >= b for a, b in zip(self.levels, self.levels[1:])):
            raise ValueError(f"Levels must be strictly increasing: {self.levels}")
        if errors.shape != (len(self.levels),):
            raise ValueError(
                f"{errors.shape[0]} errors for {len(self.levels)} levels"
            )
        if (errors < 0).any() or (batch_errors < 0).any():
            raise ValueError("Strong errors can't be negative")
        if self.p <= 0:
            raise ValueError(f"Moment exponent must be positive, got {self.p}")

    @classmethod
    def from_block_sums(
        cls,
        levels: Sequence[int],
        p: float,
        block_sums: np.ndarray,
        paths_per_block: int,
        blocks_per_batch: int,
    ) -> "ErrorTable":
        """
        Aggregate per-block sums of path contributions, (blocks, levels), in
        block-index order.

        >>> sums = np.array([[4.0, 1.0], [4.0, 1.0]])
        >>> table = ErrorTable.from_block_sums([2, 4], 2, sums, 1, 1)
        >>> table.errors.tolist()
        [2.0, 1.0]
        """
        block_sums = np.asarray(block_sums, dtype=float)
        blocks = block_sums.shape[0]
        if blocks % blocks_per_batch:
            raise ValueError(
                f"{blocks} blocks don't split into batches of {blocks_per_batch}"
            )
        batch_count = blocks // blocks_per_batch
        batch_paths = paths_per_block * blocks_per_batch

        batch_sums = block_sums.reshape(batch_count, blocks_per_batch, -1).sum(axis=1)
        totals = batch_sums.sum(axis=0)
        return cls(
            levels=tuple(levels),
            p=p,
            errors=(totals / (batch_paths * batch_count)) ** (1 / p),
            batch_errors=(batch_sums / batch_paths) ** (1 / p),
            path_count=batch_paths * batch_count,
            batch_count=batch_count,
        )

    @property
    def batch_stderr(self) -> np.ndarray:
        """Standard error of the per-level error, from the batch replicates."""
        if self.batch_count < 2:
            return np.full(len(self.levels), math.nan)
        return self.batch_errors.std(axis=0, ddof=1) / math.sqrt(self.batch_count)

    def window(self, lowest: int, highest: int) -> "ErrorTable":
        """The sub-table of levels in [lowest, highest]."""
        keep = [i for i, n in enumerate(self.levels) if lowest <= n <= highest]
        return ErrorTable(
            levels=tuple(self.levels[i] for i in keep),
            p=self.p,
            errors=self.errors[keep],
            batch_errors=self.batch_errors[:, keep],
            path_count=self.path_count,
            batch_count=self.batch_count,
        )


@dataclass(frozen=True)
class RateFit:
    # Convergence order: the negated slope of log2(error) on log2(n).
    order: float
    slope: float
    intercept: float
    residual_sum: float
    ci_halfwidth: float
    levels: Tuple[int, ...] = ()
    batch_orders: Tuple[float, ...] = ()

    def __str__(self):
        return f"{self.order:.3f} ± {self.ci_halfwidth:.3f}"


class WeightKind(enum.Enum):
    NONE = "none"
    FUNCTION = "function"


class Statistic(enum.Enum):
    # Largest absolute value of the running integral over the interval.
    SUP = "sup"
    # The integral over the whole interval, with its sign.
    TERMINAL = "terminal"


@dataclass(frozen=True, eq=False)
class QuadratureSample:
    n: int
    p: float
    weight_kind: WeightKind
    values: np.ndarray
    norm: float
    statistic: Statistic = Statistic.SUP
    interval: Tuple[float, float] = (0.0, 1.0)

    def __post_init__(self):
        if not np.isfinite(self.values).all():
            raise ValueError("Quadrature functional produced non-finite values")

    @property
    def paths(self) -> int:
        return len(self.values)

    @property
    def norm_stderr(self) -> float:
        """Delta-method standard error of the empirical L_p norm."""
        moments = np.abs(self.values) ** self.p
        if len(moments) < 2:
            return math.nan
        mean = moments.mean()
        if mean == 0:
            return 0.0
        mean_stderr = moments.std(ddof=1) / math.sqrt(len(moments))
        return mean ** (1 / self.p - 1) * mean_stderr / self.p


def empirical_norm(values: np.ndarray, p: float, batches: Optional[int] = None):
    """
    (mean |v|^p)^(1/p), and with ``batches`` also the per-batch norms.

    >>> empirical_norm(np.array([3.0, -3.0]), 2)
    3.0
    """
    moments = np.abs(np.asarray(values, dtype=float)) ** p
    norm = float(moments.mean() ** (1 / p))
    if batches is None:
        return norm
    per_batch = moments.reshape(batches, -1).mean(axis=1) ** (1 / p)
    return norm, per_batch
