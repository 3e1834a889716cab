"""
Log-log regression of errors against step counts.
"""
import math
from typing import Optional, Sequence, Tuple

import numpy as np
import structlog
from scipy import stats

from emrates.metrics._model import ErrorTable, RateFit

_LOG = structlog.get_logger()

# Fewer batch replicates than this give no confidence interval (NaN).
_MINIMUM_BATCHES = 8


class RateFitError(ValueError):
    pass


def _log_fit(levels: Sequence[int], errors: np.ndarray):
    if (errors <= 0).any():
        raise RateFitError(
            "Zero error in the fit window (an exact reference matching the scheme?)"
        )
    return stats.linregress(np.log2(levels), np.log2(errors))


def fit_rate(
    table: ErrorTable, window: Optional[Tuple[int, int]] = None
) -> RateFit:
    """
    Least squares fit of log2(error) on log2(n), optionally over the levels
    within ``window`` (inclusive).

    >>> levels = [16, 32, 64, 128]
    >>> errors = 3.0 * np.array(levels, dtype=float) ** -0.5
    >>> table = ErrorTable(levels, 2, errors, np.tile(errors, (8, 1)), 8000, 8)
    >>> round(fit_rate(table).order, 10)
    0.5
    """
    if window is not None:
        table = table.window(*window)
    if len(table.levels) < 3:
        raise RateFitError(
            f"Need at least three levels to fit a rate, got {list(table.levels)}"
        )

    fit = _log_fit(table.levels, table.errors)
    residuals = np.log2(table.errors) - (
        fit.intercept + fit.slope * np.log2(table.levels)
    )

    batch_orders = tuple(
        -_log_fit(table.levels, row).slope for row in table.batch_errors
    )
    batches = len(batch_orders)
    if batches < _MINIMUM_BATCHES:
        _LOG.warning("rate.few_batches", batches=batches, wanted=_MINIMUM_BATCHES)
        ci_halfwidth = math.nan
    else:
        spread = float(np.std(batch_orders, ddof=1))
        ci_halfwidth = stats.t.ppf(0.975, batches - 1) * spread / math.sqrt(batches)

    result = RateFit(
        order=-float(fit.slope),
        slope=float(fit.slope),
        intercept=float(fit.intercept),
        residual_sum=float(np.sum(residuals**2)),
        ci_halfwidth=float(ci_halfwidth),
        levels=table.levels,
        batch_orders=batch_orders,
    )
    _LOG.debug("rate.fit", order=result.order, ci=result.ci_halfwidth)
    return result
