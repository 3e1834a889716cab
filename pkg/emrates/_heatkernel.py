"""
Gaussian densities and the heat semigroup P_t f = p_t * f, used as analytic
oracles for the quadrature and density diagnostics.
"""
import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
import structlog
from cachetools.func import lru_cache
from scipy.integrate import quad
from scipy.signal import fftconvolve
from scipy.special import ndtr

from emrates._coefficients import DriftSpec, RegularityKind
from emrates._paths import SeedLineage, StreamTag, standard_normals
from emrates._seminorm import DivergentSeminorm

_LOG = structlog.get_logger()

# Convolutions are truncated at this many standard deviations.
WINDOW = 8.0


class NotPositiveDefinite(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class GaussianKernel:
    covariance: np.ndarray
    precision: np.ndarray
    determinant: float

    @classmethod
    def from_covariance(cls, covariance) -> "GaussianKernel":
        covariance = np.atleast_2d(np.asarray(covariance, dtype=float))
        if covariance.ndim != 2 or covariance.shape[0] != covariance.shape[1]:
            raise NotPositiveDefinite(f"Covariance of shape {covariance.shape}")
        if np.abs(covariance - covariance.T).max() > 1e-12:
            raise NotPositiveDefinite("Covariance is not symmetric")
        eigenvalues = np.linalg.eigvalsh(covariance)
        if eigenvalues.min() <= 0:
            raise NotPositiveDefinite(
                f"Covariance has eigenvalue {eigenvalues.min()} <= 0"
            )
        return cls(
            covariance=covariance,
            precision=np.linalg.inv(covariance),
            determinant=float(np.prod(eigenvalues)),
        )

    @classmethod
    def isotropic(cls, t: float, dimension: int = 1) -> "GaussianKernel":
        return cls.from_covariance(t * np.eye(dimension))

    @property
    def dimension(self) -> int:
        return self.covariance.shape[0]

    def __call__(self, x):
        return density(self, x)


@lru_cache(maxsize=64)
def heat_kernel(t: float, dimension: int = 1) -> GaussianKernel:
    """The kernel p_t of Brownian motion at time t."""
    if t <= 0:
        raise ValueError(f"Heat kernel needs t > 0, got {t}")
    return GaussianKernel.isotropic(t, dimension)


def density(kernel: GaussianKernel, x) -> Union[float, np.ndarray]:
    """
    p_Sigma(x) for a point, or for every row of an (N, d) array.

    >>> round(density(GaussianKernel.isotropic(1.0), 0.0), 6)
    0.398942
    >>> round(density(GaussianKernel.isotropic(1.0, 2), [0.0, 0.0]) * 2 * math.pi, 12)
    1.0
    """
    points = np.asarray(x, dtype=float)
    single = points.ndim == 0 or (points.ndim == 1 and kernel.dimension > 1)
    points = points.reshape(-1, kernel.dimension)
    if points.shape[1] != kernel.dimension:
        raise ValueError(
            f"Points of dimension {points.shape[1]} for a "
            f"{kernel.dimension}-dimensional kernel"
        )
    quadratic = np.einsum("ni,ij,nj->n", points, kernel.precision, points)
    scale = 1 / math.sqrt((2 * math.pi) ** kernel.dimension * kernel.determinant)
    values = scale * np.exp(-0.5 * quadratic)
    return float(values[0]) if single else values


def kernel_lp_norm(t: float, theta: float, dimension: int = 1) -> float:
    """
    |p_t| in L_theta, in closed form.

    >>> kernel_lp_norm(0.3, 1.0)
    1.0
    """
    if theta < 1:
        raise ValueError(f"theta must be at least 1, got {theta}")
    d = dimension
    return (2 * math.pi * t) ** (-d * (theta - 1) / (2 * theta)) * theta ** (
        -d / (2 * theta)
    )


def as_scalar(f: Callable, component: int = 0) -> Callable:
    """View a function of (N, d) points as scalar-valued, one value per point."""

    def evaluate(points):
        values = np.asarray(f(points), dtype=float)
        if values.ndim == 2:
            return values[:, component]
        return values.reshape(len(points))

    return evaluate


@dataclass(frozen=True)
class SemigroupValue:
    value: float
    error_estimate: float
    method: str


def _grid_expectation(g, x, sd, z_step, window):
    per_axis = int(math.ceil(2 * window / z_step))
    z = -window + (np.arange(per_axis) + 0.5) * z_step
    axes = np.meshgrid(*([z] * len(x)), indexing="ij")
    offsets = np.stack([a.ravel() for a in axes], axis=1)
    weights = np.exp(-0.5 * (offsets**2).sum(axis=1)) * (
        z_step / math.sqrt(2 * math.pi)
    ) ** len(x)
    return float(np.sum(g(x + sd * offsets) * weights))


def semigroup_apply(
    f: Callable,
    t: float,
    x,
    mesh: Optional[float] = None,
    *,
    samples: int = 10**6,
    seed: int = 0,
    window: float = WINDOW,
) -> SemigroupValue:
    """
    P_t f(x), with an error estimate.

    In one dimension this is adaptive quadrature unless a ``mesh`` is given,
    two dimensions use a midpoint grid, and higher dimensions Monte Carlo.

    >>> heaviside = lambda p: (p[:, 0] >= 0).astype(float)
    >>> round(semigroup_apply(heaviside, 0.5, 0.0).value, 8)
    0.5
    """
    if t <= 0:
        raise ValueError(f"Semigroup needs t > 0, got {t}")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    d = len(x)
    g = as_scalar(f)
    sd = math.sqrt(t)

    if d >= 3:
        normals = standard_normals(
            SeedLineage(seed, 0, StreamTag.MONTE_CARLO), samples * d
        ).reshape(samples, d)
        values = g(x + sd * normals)
        return SemigroupValue(
            float(values.mean()),
            float(values.std(ddof=1) / math.sqrt(samples)),
            "monte_carlo",
        )

    # Truncation beyond the window, with sup |f| probed on it.
    probe = np.linspace(-window, window, 65)[:, None] * np.ones(d)
    largest = float(np.abs(g(x + sd * probe)).max())
    tail = (1 - (1 - 2 * ndtr(-window)) ** d) * largest

    if d == 1 and mesh is None:

        def integrand(z):
            return g(np.array([[x[0] + sd * z]]))[0] * math.exp(-0.5 * z * z)

        value, error = quad(
            integrand, -window, window, limit=400, epsabs=1e-13, epsrel=1e-12
        )
        norm = math.sqrt(2 * math.pi)
        return SemigroupValue(value / norm, error / norm + tail, "quadrature")

    z_step = 0.05 if mesh is None else mesh / sd
    value = _grid_expectation(g, x, sd, z_step, window)
    coarser = _grid_expectation(g, x, sd, 2 * z_step, window)
    return SemigroupValue(value, abs(value - coarser) + tail, "grid")


def _check_order_is_finite(f, alpha: float, m: float):
    if not isinstance(f, DriftSpec):
        return
    kind = f.regularity.kind
    if kind is RegularityKind.BOUNDED_MEASURABLE or (
        kind is RegularityKind.SOBOLEV and alpha * m >= 1
    ):
        raise DivergentSeminorm(alpha, m)


def semigroup_on_grid(
    f: Callable, times: Sequence[float], mesh: float, radius: float
) -> Tuple[np.ndarray, List[np.ndarray]]:
    """
    P_t f on a one-dimensional grid over [-radius, radius], for each t.

    Kernels are sampled on the grid and renormalised to unit mass.
    """
    g = as_scalar(f)
    reach = WINDOW * math.sqrt(max(times))
    half = int(math.ceil((radius + reach) / mesh))
    y = np.arange(-half, half + 1) * mesh
    values = g(y[:, None])
    inner = np.abs(y) <= radius

    smoothed = []
    for t in times:
        width = int(math.ceil(WINDOW * math.sqrt(t) / mesh))
        offsets = np.arange(-width, width + 1) * mesh
        kernel = np.exp(-0.5 * offsets**2 / t)
        kernel /= kernel.sum()
        smoothed.append(fftconvolve(values, kernel, mode="same")[inner])
    return y[inner], smoothed


@dataclass(frozen=True)
class TimeRegularityRow:
    s: float
    t: float
    left: float
    right: float

    @property
    def ratio(self) -> float:
        return self.left / self.right if self.right > 0 else math.nan


def time_regularity_sweep(
    f: Callable,
    alpha: float,
    m: float,
    pairs: Sequence[Tuple[float, float]],
    delta: Optional[float] = None,
    mesh: float = 2.0**-10,
    radius: float = WINDOW,
) -> List[TimeRegularityRow]:
    """
    |P_t f - P_s f| in L_m against |t - s|^delta s^(alpha/2 - delta) for each pair.
    """
    _check_order_is_finite(f, alpha, m)
    if delta is None:
        delta = alpha / 2
    rows = []
    for s, t in pairs:
        if not 0 < s <= t <= 1:
            raise ValueError(f"Need 0 < s <= t <= 1, got s={s}, t={t}")
        if s == t:
            rows.append(TimeRegularityRow(s, t, 0.0, 0.0))
            continue
        _, (at_s, at_t) = semigroup_on_grid(f, (s, t), mesh, radius)
        left = float(np.sum(np.abs(at_t - at_s) ** m) * mesh) ** (1 / m)
        right = (t - s) ** delta * s ** (alpha / 2 - delta)
        rows.append(TimeRegularityRow(s, t, left, right))
    _LOG.debug("heatkernel.time_regularity", rows=len(rows))
    return rows


def _bounded_spread(ratios: Sequence[float], max_spread: float) -> bool:
    ratios = [r for r in ratios if not math.isnan(r)]
    if not ratios:
        return True
    if not all(math.isfinite(r) for r in ratios):
        return False
    return max(ratios) < max_spread * min(ratios)


def check_semigroup_time_regularity(
    f: Callable,
    alpha: float,
    m: float,
    s,
    t,
    *,
    max_spread: float = 100.0,
    **sweep_options,
) -> bool:
    """
    Whether the time-regularity ratio stays bounded over the (s, t) pairs.

    ``s`` and ``t`` are single times or equal-length sweeps. Pairs where both
    sides vanish (t = s, or a constant f) don't constrain anything.
    """
    pairs = list(zip(np.atleast_1d(s).tolist(), np.atleast_1d(t).tolist()))
    rows = time_regularity_sweep(f, alpha, m, pairs, **sweep_options)
    ratios = [row.ratio if row.left > 1e-12 else math.nan for row in rows]
    return _bounded_spread(ratios, max_spread)


def gaussian_moment_ratio(
    k: int,
    t: float,
    dimension: int = 1,
    widening: float = 2.0,
    reach: float = 12.0,
    points: int = 4001,
) -> float:
    """
    sup |x|^k p_t(x) / (t^(k/2) p_{widening t}(x)) over |x| <= reach sqrt(t).

    Both kernels are isotropic, so one ray through the origin is enough.
    """
    r = np.linspace(0, reach * math.sqrt(t), points)
    ray = np.zeros((points, dimension))
    ray[:, 0] = r
    ratio = (
        r**k
        * density(heat_kernel(t, dimension), ray)
        / (t ** (k / 2) * density(heat_kernel(widening * t, dimension), ray))
    )
    return float(ratio.max())


def check_gaussian_moment_bound(
    k: int, times: Sequence[float], dimension: int = 1, max_spread: float = 2.0
) -> bool:
    """|x|^k p_t <= N t^(k/2) p_2t with one N for every t in ``times``."""
    ratios = [gaussian_moment_ratio(k, t, dimension) for t in times]
    return _bounded_spread(ratios, max_spread)


def increment_moment(
    g: Callable, s: float, t: float, p: float, z_step: float = 0.02
) -> float:
    """
    |g(B_t) - g(B_s)| in L_p of the probability space, B a 1-d Brownian motion
    from the origin, by quadrature over the two independent Gaussian factors.
    """
    if not 0 < s <= t:
        raise ValueError(f"Need 0 < s <= t, got s={s}, t={t}")
    g = as_scalar(g)
    per_axis = int(math.ceil(2 * WINDOW / z_step))
    z = -WINDOW + (np.arange(per_axis) + 0.5) * z_step
    weights = np.exp(-0.5 * z**2)
    weights /= weights.sum()

    at_s = math.sqrt(s) * z
    at_t = at_s[:, None] + math.sqrt(t - s) * z[None, :]
    before = g(at_s[:, None])[:, None]
    after = g(at_t.reshape(-1, 1)).reshape(at_t.shape)
    moment = np.einsum("i,ij,j->", weights, np.abs(after - before) ** p, weights)
    return float(moment) ** (1 / p)


def check_increment_lp_bound(
    g: Callable,
    alpha: float,
    m: float,
    p: float,
    s_values: Sequence[float],
    t_factor: float = 2.0,
    max_spread: float = 100.0,
) -> bool:
    """
    Whether |g(B_t) - g(B_s)|_Lp / (s^(-1/(2m)) |t - s|^(alpha/2)) stays
    bounded along t = t_factor * s.
    """
    _check_order_is_finite(g, alpha, m)
    ratios = []
    for s in s_values:
        t = t_factor * s
        bound = s ** (-1 / (2 * m)) * (t - s) ** (alpha / 2)
        ratios.append(increment_moment(g, s, t, p) / bound)
    return _bounded_spread(ratios, max_spread)
