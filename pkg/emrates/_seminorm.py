"""
Fractional Sobolev (Gagliardo) seminorms.

    [f]^m = integral over x, y of |f(x) - f(y)|^m / |x - y|^(d + alpha m)

Written in polar form around the increment z = y - x this is an integral of
r^(-1 - alpha m) times the L_m increment modulus

    Phi(r w) = integral over x of |f(x + r w) - f(x)|^m

over radii r and unit directions w. We estimate Phi on a midpoint grid of a
truncation window, integrate radii beyond a small shell exactly in the
variable u = r^(-alpha m) with the trapezoid rule, and close the inner shell
with a power law fitted to Phi just outside it.
"""
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
import structlog
from scipy.integrate import trapezoid

_LOG = structlog.get_logger()

# Far-field radius, as a multiple of the window radius.
_FAR_FIELD = 1e6


class DivergentSeminorm(ArithmeticError):
    """The seminorm integral does not converge for this (alpha, m)."""

    def __init__(self, alpha: float, m: float, local_exponent: Optional[float] = None):
        message = f"Seminorm of order alpha={alpha}, m={m} diverges"
        if local_exponent is not None:
            message += f" (local increment exponent {local_exponent:.3f})"
        super().__init__(message)
        self.alpha = alpha
        self.m = m
        self.local_exponent = local_exponent


@dataclass(frozen=True)
class SeminormEstimate:
    alpha: float
    m: float
    value: float
    divergent: bool
    quadrature_error_bound: float
    mesh: float
    truncation_radius: float
    # Fitted exponent gamma of Phi(r) ~ r^gamma near zero.
    local_exponent: float

    def require_finite(self) -> "SeminormEstimate":
        if self.divergent:
            raise DivergentSeminorm(self.alpha, self.m, self.local_exponent)
        return self


def _shell_integral(a1: float, b1: float, a2: float, b2: float, s: float) -> float:
    """
    Integral of |x - y|^(-1 - s) over x in [a1, b1), y in [a2, b2), b1 <= a2.
    """
    q = 1 - s
    if a1 == -math.inf and b2 == math.inf:
        return math.inf
    if a1 == -math.inf:
        total = (b2 - b1) ** q - (a2 - b1) ** q
    elif b2 == math.inf:
        total = (a2 - a1) ** q - (a2 - b1) ** q
    else:
        total = (a2 - a1) ** q - (b2 - a1) ** q - (a2 - b1) ** q + (b2 - b1) ** q
    return total / (s * q)


def step_value(pieces: Sequence[Sequence[float]], x: float) -> float:
    """Value of a sum of half-open interval indicators [left, right) at x."""
    return sum(height for left, right, height in pieces if left <= x < right)


def step_function_seminorm(
    pieces: Sequence[Sequence[float]], alpha: float, m: float
) -> Optional[float]:
    """
    Closed-form seminorm of a one-dimensional step function.

    ``pieces`` are (left, right, height) triples. Returns None when the seminorm
    is infinite.

    >>> step_function_seminorm([[0, 1, 1]], alpha=0.25, m=2)
    4.0
    >>> step_function_seminorm([[0, 1, 1]], alpha=0.5, m=2) is None
    True
    >>> step_function_seminorm([[0, math.inf, 1]], alpha=0.25, m=2) is None
    True
    """
    s = alpha * m
    breaks = sorted(
        {float(e) for piece in pieces for e in piece[:2] if math.isfinite(e)}
    )
    if not breaks:
        return 0.0
    edges = [-math.inf, *breaks, math.inf]
    cells = list(zip(edges[:-1], edges[1:]))

    def representative(cell):
        left, right = cell
        if left == -math.inf:
            return right - 1
        if right == math.inf:
            return left + 1
        return (left + right) / 2

    values = [step_value(pieces, representative(c)) for c in cells]
    total = 0.0
    for k, (a1, b1) in enumerate(cells):
        for j in range(k + 1, len(cells)):
            a2, b2 = cells[j]
            jump = abs(values[k] - values[j])
            if jump == 0:
                continue
            if s >= 1:
                return None
            shell = _shell_integral(a1, b1, a2, b2, s)
            if math.isinf(shell):
                return None
            # Both orderings of the pair.
            total += 2 * jump**m * shell
    return total ** (1 / m)


def _directions(dimension: int, count: int) -> Tuple[np.ndarray, np.ndarray]:
    """Unit directions, closed under negation, with their surface weights."""
    if dimension == 1:
        return np.array([[1.0], [-1.0]]), np.array([1.0, 1.0])
    if count % 2:
        raise ValueError(f"Direction count must be even, got {count}")
    angles = 2 * np.pi * (np.arange(count) + 0.5) / count
    return (
        np.stack([np.cos(angles), np.sin(angles)], axis=1),
        np.full(count, 2 * np.pi / count),
    )


def _midpoint_grid(center: np.ndarray, radius: float, mesh: float) -> np.ndarray:
    per_axis = int(round(2 * radius / mesh))
    ticks = [c - radius + (np.arange(per_axis) + 0.5) * mesh for c in center]
    mesh_points = np.meshgrid(*ticks, indexing="ij")
    return np.stack([p.ravel() for p in mesh_points], axis=1)


def _as_scalar_increments(f: Callable, component: Optional[int]) -> Callable:
    def evaluate(x):
        values = np.asarray(f(x), dtype=float)
        if values.ndim == 1:
            return values[:, None]
        if component is not None:
            return values[:, component : component + 1]
        return values

    return evaluate


@dataclass(frozen=True)
class _MeshResult:
    total: float
    local_exponent: float
    divergent: bool


def _integrate_at_mesh(
    f: Callable,
    center: np.ndarray,
    radius: float,
    mesh: float,
    s: float,
    m: float,
    directions: np.ndarray,
    direction_weights: np.ndarray,
    radial_nodes: int,
    divergence_margin: float,
) -> _MeshResult:
    points = _midpoint_grid(center, radius, mesh)
    cell_volume = mesh ** points.shape[1]
    base = f(points)

    def modulus(offset: np.ndarray) -> float:
        moved = points + offset
        jumps = np.linalg.norm(f(moved) - base, axis=1) ** m
        # Pairs leaving the window stand in for the mirrored pairs entering it.
        weight = np.where(np.all(np.abs(moved - center) <= radius, axis=1), 1.0, 2.0)
        return cell_volume * float(np.sum(jumps * weight))

    shell = math.sqrt(mesh)
    u = np.linspace(0.0, shell**-s, radial_nodes + 1)
    radii = np.empty_like(u)
    radii[0] = _FAR_FIELD * radius
    radii[1:] = u[1:] ** (-1 / s)
    radii[-1] = shell

    outer = 0.0
    at_shell = 0.0
    at_half_shell = 0.0
    for direction, weight in zip(directions, direction_weights):
        phi = np.array([modulus(r * direction) for r in radii])
        outer += weight * trapezoid(phi, u) / s
        at_shell += weight * phi[-1]
        at_half_shell += weight * modulus(shell / 2 * direction)

    if at_shell == 0 or at_half_shell == 0:
        # Phi vanishes at or inside the shell: nothing singular left.
        return _MeshResult(outer, math.inf, False)

    gamma = math.log2(at_shell / at_half_shell)
    if gamma - s <= divergence_margin:
        return _MeshResult(math.inf, gamma, True)
    inner = at_shell * shell**-s / (gamma - s)
    return _MeshResult(outer + inner, gamma, False)


_DEFAULTS = {
    # dimension: (truncation radius, mesh, radial nodes)
    1: (10.0, 2.0**-10, 256),
    2: (4.0, 2.0**-5, 64),
}


def estimate_sobolev_seminorm(
    f: Callable,
    alpha: float,
    m: float,
    truncation_radius: Optional[float] = None,
    mesh: Optional[float] = None,
    *,
    center: Optional[Sequence[float]] = None,
    dimension: Optional[int] = None,
    component: Optional[int] = None,
    directions: int = 16,
    radial_nodes: Optional[int] = None,
    divergence_margin: float = 0.05,
    growth_factor: float = 1.5,
) -> SeminormEstimate:
    """
    Numerically estimate [f] of order (alpha, m) over a window of ``truncation_radius``
    around ``center``.

    ``f`` maps an (N, d) array of points to N scalars or N vectors (vector
    increments are measured in the Euclidean norm, or on ``component`` alone).
    The window is exact when f is constant outside it.

    The estimate is repeated at twice the mesh; the difference is the reported
    quadrature error, and growth beyond ``growth_factor`` under refinement marks
    the seminorm divergent.
    """
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    if m < 1:
        raise ValueError(f"m must be at least 1, got {m}")

    if dimension is None:
        dimension = getattr(f, "dimension", 1)
    if dimension not in _DEFAULTS:
        raise ValueError(
            f"Seminorm quadrature supports dimensions 1 and 2, got {dimension}"
        )
    default_radius, default_mesh, default_nodes = _DEFAULTS[dimension]
    radius = default_radius if truncation_radius is None else truncation_radius
    mesh = default_mesh if mesh is None else mesh
    radial_nodes = default_nodes if radial_nodes is None else radial_nodes
    if radius <= 0 or mesh <= 0:
        raise ValueError("Truncation radius and mesh must be positive")

    center = np.zeros(dimension) if center is None else np.asarray(center, float)
    s = alpha * m
    evaluate = _as_scalar_increments(f, component)
    unit_directions, weights = _directions(dimension, directions)

    fine, coarse = (
        _integrate_at_mesh(
            evaluate,
            center,
            radius,
            h,
            s,
            m,
            unit_directions,
            weights,
            radial_nodes,
            divergence_margin,
        )
        for h in (mesh, 2 * mesh)
    )

    divergent = fine.divergent or coarse.divergent
    if not divergent and coarse.total > 0:
        divergent = fine.total / coarse.total > growth_factor

    log = _LOG.bind(alpha=alpha, m=m, mesh=mesh, radius=radius)
    if divergent:
        log.info("seminorm.divergent", local_exponent=fine.local_exponent)
        value, error = math.inf, math.inf
    else:
        value = fine.total ** (1 / m)
        error = abs(value - coarse.total ** (1 / m))
        log.debug("seminorm.estimate", value=value, error=error)

    return SeminormEstimate(
        alpha=alpha,
        m=m,
        value=value,
        divergent=divergent,
        quadrature_error_bound=error,
        mesh=mesh,
        truncation_radius=radius,
        local_exponent=fine.local_exponent,
    )


@dataclass(frozen=True)
class EmbeddingCheck:
    theta: float
    # The seminorm of order (alpha theta, m / theta).
    inner: SeminormEstimate
    bound: float
    holds: bool


def interpolation_embedding(
    f: Callable,
    alpha: float,
    m: float,
    theta: float,
    *,
    sup_norm: Optional[float] = None,
    tolerance: float = 0.05,
    outer: Optional[SeminormEstimate] = None,
    **estimator_options,
) -> EmbeddingCheck:
    """
    Compare [f] of order (alpha theta, m / theta) with 2 |f|_sup^(1 - theta) [f]^theta
    on the numerical estimates.

    ``outer`` may pass in an existing estimate of [f] of order (alpha, m).
    """
    if not 0 < theta < 1:
        raise ValueError(f"theta must lie in (0, 1), got {theta}")
    if sup_norm is None:
        sup_norm = getattr(f, "sup_norm_bound", None)
    if sup_norm is None or not math.isfinite(sup_norm):
        raise ValueError("The embedding needs a finite sup-norm bound for f")

    if outer is None:
        outer = estimate_sobolev_seminorm(f, alpha, m, **estimator_options)
    inner = estimate_sobolev_seminorm(
        f, alpha * theta, m / theta, **estimator_options
    )
    outer.require_finite()
    inner.require_finite()

    bound = 2 * sup_norm ** (1 - theta) * outer.value**theta
    holds = inner.value <= bound * (1 + tolerance)
    _LOG.debug(
        "seminorm.embedding",
        theta=theta,
        left=inner.value,
        right=bound,
        holds=holds,
    )
    return EmbeddingCheck(theta=theta, inner=inner, bound=bound, holds=holds)


def check_interpolation_embedding(
    f: Callable, alpha: float, m: float, theta: float, **options
) -> bool:
    """Whether the interpolation inequality holds for f at ``theta``."""
    return interpolation_embedding(f, alpha, m, theta, **options).holds
