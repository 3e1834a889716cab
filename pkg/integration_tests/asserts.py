import math
import operator
from pathlib import Path
from typing import Optional

import numpy as np

from emrates._report import read_csv
from emrates.metrics import RateFit


def assert_bitwise_equal(actual: np.ndarray, expected: np.ndarray, what: str = ""):
    """Same shape, same dtype and every element the same double."""
    __tracebackhide__ = operator.methodcaller("errisinstance", AssertionError)

    actual = np.asarray(actual)
    expected = np.asarray(expected)
    assert actual.shape == expected.shape, f"{what} shapes differ"
    assert actual.dtype == expected.dtype, f"{what} dtypes differ"
    differing = np.flatnonzero(actual.ravel() != expected.ravel())
    assert not len(differing), (
        f"{what} differs in {len(differing)} of {actual.size} entries, "
        f"first at flat index {differing[0]}: "
        f"{actual.ravel()[differing[0]]!r} != {expected.ravel()[differing[0]]!r}"
    )


def assert_order_within(
    fit: RateFit, minimum: Optional[float], maximum: Optional[float] = None
):
    __tracebackhide__ = operator.methodcaller("errisinstance", AssertionError)

    assert math.isfinite(fit.order), f"Fitted order is {fit.order}"
    if minimum is not None:
        assert fit.order >= minimum, f"Order {fit} is below {minimum}"
    if maximum is not None:
        assert fit.order <= maximum, f"Order {fit} is above {maximum}"


def assert_within_stderr(
    value: float, expected: float, stderr: float, multiple: float = 3.0
):
    """A Monte Carlo estimate within ``multiple`` standard errors of the truth."""
    __tracebackhide__ = operator.methodcaller("errisinstance", AssertionError)

    assert stderr > 0 and math.isfinite(stderr), f"Unusable stderr {stderr}"
    gap = abs(value - expected)
    assert gap <= multiple * stderr, (
        f"{value} is {gap / stderr:.1f} standard errors ({stderr:.3g}) "
        f"from {expected}"
    )


def assert_same_bytes(actual: Path, expected: Path):
    __tracebackhide__ = operator.methodcaller("errisinstance", AssertionError)

    a, b = actual.read_bytes(), expected.read_bytes()
    if a != b:
        rows_a, footer_a = read_csv(actual)
        rows_b, footer_b = read_csv(expected)
        assert (rows_a, footer_a) == (rows_b, footer_b)
        raise AssertionError(f"{actual} and {expected} parse the same but differ")
