"""
The Euler-Maruyama scheme on a shared Brownian lattice.

    X^n_{k+1} = X^n_k + b(X^n_k) / n + sigma(X^n_k) (W_{(k+1)/n} - W_{k/n})

Coarse grids take their increments by coarsening the driving lattice, so
trajectories at every n (and the reference solution) see the same path.

We integrate the displacement X^n - x0 rather than X^n itself: with b = 0 and
sigma = I the displacement is a sum of exact fixed-point increments, so the
states reproduce x0 + W bitwise.
"""
import enum
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import structlog
from scipy.signal import lfilter

from emrates._coefficients import (
    DiffusionSpec,
    DriftSpec,
    RegularityKind,
    builtin_drift,
)
from emrates._paths import TICK, BrownianLattice, GridMap, SeedLineage, coarsen

_LOG = structlog.get_logger()

MINIMUM_REFERENCE_GAP = 4
DEFAULT_REFERENCE_GAP = 6


class IncompatibleAssumptions(ValueError):
    """The coefficients don't satisfy the assumption profile they were tagged with."""


class ReferenceGapTooSmall(ValueError):
    pass


class DimensionMismatch(ValueError):
    pass


class AssumptionProfile(enum.Enum):
    # Elliptic C^2 diffusion, bounded measurable drift.
    MULTIPLICATIVE = "multiplicative"
    # Identity diffusion, bounded drift with fractional Sobolev regularity.
    ADDITIVE_SOBOLEV = "additive_sobolev"
    # Anything goes, but only closed-form references may be used.
    ORACLE_ONLY = "oracle_only"


class ClosedForm(enum.Enum):
    ORNSTEIN_UHLENBECK = "ornstein_uhlenbeck"
    GEOMETRIC_BROWNIAN = "geometric_brownian"
    AFFINE = "affine"


_ADDITIVE_REGULARITY = {
    RegularityKind.SOBOLEV,
    RegularityKind.HOELDER,
    RegularityKind.LIPSCHITZ,
    RegularityKind.SMOOTH,
}


def _profile_problems(
    drift: DriftSpec, diffusion: DiffusionSpec, profile: AssumptionProfile
):
    if profile is AssumptionProfile.ORACLE_ONLY:
        return
    if drift.oracle_only or not drift.is_bounded:
        yield f"drift {drift.name!r} is unbounded (oracle-only)"
    if diffusion.oracle_only:
        yield f"diffusion {diffusion.name!r} is oracle-only"

    if profile is AssumptionProfile.ADDITIVE_SOBOLEV:
        if not diffusion.is_additive:
            yield f"diffusion {diffusion.name!r} is not the identity"
        if drift.regularity.kind not in _ADDITIVE_REGULARITY:
            yield f"drift regularity {drift.regularity} has no Sobolev order"
    elif profile is AssumptionProfile.MULTIPLICATIVE:
        if not diffusion.is_elliptic:
            yield f"diffusion {diffusion.name!r} is not uniformly elliptic"
        if not math.isfinite(diffusion.c2_bound):
            yield f"diffusion {diffusion.name!r} has no finite C^2 bound"


@dataclass(frozen=True, eq=False)
class SdeSpec:
    drift: DriftSpec
    diffusion: DiffusionSpec
    x0: Sequence[float]
    profile: AssumptionProfile = AssumptionProfile.MULTIPLICATIVE

    def __post_init__(self):
        object.__setattr__(self, "x0", tuple(float(v) for v in np.ravel(self.x0)))
        object.__setattr__(self, "profile", AssumptionProfile(self.profile))
        if not self.drift.dimension == self.diffusion.dimension == len(self.x0):
            raise DimensionMismatch(
                f"Drift dimension {self.drift.dimension}, diffusion dimension "
                f"{self.diffusion.dimension} and x0 of length {len(self.x0)} differ"
            )
        problems = list(_profile_problems(self.drift, self.diffusion, self.profile))
        if problems:
            raise IncompatibleAssumptions(
                f"Profile {self.profile.value!r} doesn't hold: " + "; ".join(problems)
            )

    @property
    def dimension(self) -> int:
        return len(self.x0)

    @property
    def x0_array(self) -> np.ndarray:
        return np.array(self.x0)

    @property
    def closed_form(self) -> Optional[ClosedForm]:
        drift, diffusion = self.drift, self.diffusion
        if diffusion.name == "gbm_test" and drift.name in ("zero", *_LINEAR_DRIFTS):
            return ClosedForm.GEOMETRIC_BROWNIAN
        if not diffusion.is_constant:
            return None
        if drift.name in ("zero", "constant"):
            return ClosedForm.AFFINE
        if drift.name in _LINEAR_DRIFTS and _scalar_matrix(diffusion) is not None:
            return ClosedForm.ORNSTEIN_UHLENBECK
        return None


# Drifts b(x) = -theta x.
_LINEAR_DRIFTS = ("linear_ou", "identity")


def _linear_rate(drift) -> float:
    """The theta of b(x) = -theta x (zero for the zero drift)."""
    if drift.name == "identity":
        return -1.0
    return drift.params.get("theta", 0.0)


def _scalar_matrix(diffusion: DiffusionSpec) -> Optional[float]:
    """The c of sigma = c I, if sigma is one."""
    matrix = diffusion.constant_matrix()
    scale = float(matrix[0, 0])
    if np.array_equal(matrix, scale * np.eye(diffusion.dimension)):
        return scale
    return None


@dataclass(frozen=True, eq=False)
class Trajectory:
    """
    EM states at times k / n, one row per path of the driving lattice.

    ``dense`` optionally holds the continuous-time interpolation at every
    lattice node.
    """

    n: int
    states: np.ndarray
    lineage: SeedLineage
    level: int
    dense: Optional[np.ndarray] = None
    exact: bool = False

    @property
    def paths(self) -> int:
        return self.states.shape[0]

    def fine_values(self) -> np.ndarray:
        """Values at every lattice node, shape (paths, 2**level + 1, d)."""
        if self.n == 2**self.level:
            return self.states
        if self.dense is None:
            raise ValueError(
                f"Trajectory with {self.n} steps has no values between its "
                f"grid points (solve it with dense=True)"
            )
        return self.dense


def em_solve(
    spec: SdeSpec, lattice: BrownianLattice, n: int, dense: bool = False
) -> Trajectory:
    """
    Run the scheme with n steps, driven by ``lattice`` coarsened to n steps.

    With ``dense``, also evaluate the scheme's own continuous-time formula
    (coefficients frozen at the last grid point) at every lattice node.
    """
    grid = GridMap(n, lattice.level)
    if spec.dimension != lattice.dimension:
        raise DimensionMismatch(
            f"Spec of dimension {spec.dimension} on a lattice of "
            f"dimension {lattice.dimension}"
        )

    paths, d = lattice.paths, lattice.dimension
    increments = coarsen(lattice, grid.log2_n).increments
    x0 = spec.x0_array
    diffusion = spec.diffusion
    constant_sigma = diffusion.constant_matrix() if diffusion.is_constant else None
    unit_sigma = constant_sigma is not None and np.array_equal(
        constant_sigma, np.eye(d)
    )

    displacement = np.zeros((paths, n + 1, d))
    drifts = np.empty((paths, n, d)) if dense else None
    sigmas = np.empty((paths, n, d, d)) if dense and constant_sigma is None else None
    dt = 1.0 / n
    for k in range(n):
        x = x0 + displacement[:, k]
        b = spec.drift(x)
        if unit_sigma:
            noise = increments[:, k]
        elif constant_sigma is not None:
            noise = increments[:, k] @ constant_sigma.T
        else:
            sigma = diffusion(x)
            noise = np.einsum("pij,pj->pi", sigma, increments[:, k])
            if sigmas is not None:
                sigmas[:, k] = sigma
        if drifts is not None:
            drifts[:, k] = b
        displacement[:, k + 1] = displacement[:, k] + b * dt + noise

    dense_values = None
    if dense:
        dense_values = x0 + _dense_displacement(
            lattice, grid, displacement, drifts, constant_sigma, unit_sigma, sigmas
        )

    _LOG.debug("scheme.solve", n=n, level=lattice.level, paths=paths)
    return Trajectory(
        n=n,
        states=x0 + displacement,
        lineage=lattice.lineage,
        level=lattice.level,
        dense=dense_values,
    )


def _dense_displacement(
    lattice: BrownianLattice,
    grid: GridMap,
    displacement: np.ndarray,
    drifts: np.ndarray,
    constant_sigma: Optional[np.ndarray],
    unit_sigma: bool,
    sigmas: Optional[np.ndarray],
) -> np.ndarray:
    paths, d, n, r = lattice.paths, lattice.dimension, grid.n, grid.ratio
    values = lattice.value_ticks()
    # Path increments since the anchor of each node, still exact in ticks.
    anchors = values[:, :-1:r]
    local = (values[:, :-1].reshape(paths, n, r, d) - anchors[:, :, None]) * TICK
    elapsed = np.arange(r) * lattice.step_size

    if unit_sigma:
        noise = local
    elif constant_sigma is not None:
        noise = local @ constant_sigma.T
    else:
        noise = np.einsum("pkij,pkrj->pkri", sigmas, local)

    between = (
        displacement[:, :-1, None, :]
        + drifts[:, :, None, :] * elapsed[None, None, :, None]
        + noise
    )
    return np.concatenate(
        [between.reshape(paths, n * r, d), displacement[:, -1:]], axis=1
    )


def em_solve_driftless(
    diffusion: DiffusionSpec,
    lattice: BrownianLattice,
    n: int,
    x0: Optional[Sequence[float]] = None,
    dense: bool = False,
) -> Trajectory:
    """The scheme with b = 0, started at ``x0`` (default the origin)."""
    if x0 is None:
        x0 = np.zeros(diffusion.dimension)
    profile = (
        AssumptionProfile.ORACLE_ONLY
        if diffusion.oracle_only or not diffusion.is_elliptic
        else AssumptionProfile.MULTIPLICATIVE
    )
    spec = SdeSpec(
        builtin_drift("zero", dimension=diffusion.dimension), diffusion, x0, profile
    )
    return em_solve(spec, lattice, n, dense=dense)


def reference_solution(
    spec: SdeSpec,
    lattice: BrownianLattice,
    max_level: int,
    minimum_gap: int = MINIMUM_REFERENCE_GAP,
) -> Trajectory:
    """
    The stand-in for the exact solution on every lattice node.

    ``max_level`` is the exponent of the finest EM grid it will be compared
    against. Specs with a closed form get it evaluated on the lattice and are
    flagged ``exact``; everything else gets the scheme at full lattice resolution.
    """
    gap = lattice.level - max_level
    if gap < minimum_gap:
        raise ReferenceGapTooSmall(
            f"Reference level {lattice.level} is only {gap} levels above the "
            f"finest grid (level {max_level}); need at least {minimum_gap}"
        )
    form = spec.closed_form
    log = _LOG.bind(level=lattice.level, closed_form=form and form.value)
    if form is None:
        log.debug("scheme.reference.em")
        return em_solve(spec, lattice, 2**lattice.level)

    log.debug("scheme.reference.exact")
    return Trajectory(
        n=2**lattice.level,
        states=closed_form_states(spec, lattice),
        lineage=lattice.lineage,
        level=lattice.level,
        exact=True,
    )


def closed_form_states(spec: SdeSpec, lattice: BrownianLattice) -> np.ndarray:
    """
    Closed-form solution at every lattice node, shape (paths, 2**level + 1, d).

    The OU integral over each step is replaced by its conditional mean given
    the step's increment, which is exact at the nodes up to that projection.
    """
    form = spec.closed_form
    if form is None:
        raise ValueError(f"No closed form for {spec.drift.name}/{spec.diffusion.name}")

    x0 = spec.x0_array
    times = np.arange(lattice.steps + 1) * lattice.step_size
    if form is ClosedForm.GEOMETRIC_BROWNIAN:
        theta = _linear_rate(spec.drift)
        exponent = (-theta - 0.5) * times[None, :, None] + lattice.values
        return x0 * np.exp(exponent)

    sigma = spec.diffusion.constant_matrix()
    if form is ClosedForm.AFFINE:
        velocity = spec.drift(x0[None, :])[0]
        return x0 + velocity * times[None, :, None] + lattice.values @ sigma.T

    theta = _linear_rate(spec.drift)
    scale = _scalar_matrix(spec.diffusion)
    h = lattice.step_size
    decay = math.exp(-theta * h)
    weight = -math.expm1(-theta * h) / (theta * h)
    drive = scale * weight * lattice.increments
    initial = np.broadcast_to(
        decay * x0, (lattice.paths, 1, lattice.dimension)
    ).copy()
    after, _ = lfilter([1.0], [1.0, -decay], drive, axis=1, zi=initial)
    start = np.broadcast_to(x0, (lattice.paths, 1, lattice.dimension))
    return np.concatenate([start, after], axis=1)
