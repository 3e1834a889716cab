"""
Catalogue of drift and diffusion coefficients.

Evaluators are vectorised: drifts map an (N, d) array of points to (N, d),
diffusions map it to (N, d, d).

Discontinuous drifts need a fixed pointwise representative since the scheme
only ever evaluates them pointwise:

- one-dimensional jumps take their right limit (intervals are [left, right)),
- indicators of domains include the boundary,
- the oscillatory drift 1{sin(1/x) > 0} takes the value 1 at x = 0.
"""
import enum
import importlib
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Mapping, Optional

import numpy as np
import structlog

from emrates._paths import SeedLineage, StreamTag, standard_normals
from emrates._seminorm import step_function_seminorm

_LOG = structlog.get_logger()


class CoefficientError(ValueError):
    """An unknown catalogue key, or parameters outside their documented range."""


class RegularityKind(enum.Enum):
    SMOOTH = "smooth"
    LIPSCHITZ = "lipschitz"
    HOELDER = "hoelder"
    SOBOLEV = "sobolev"
    BOUNDED_MEASURABLE = "bounded_measurable"


@dataclass(frozen=True)
class Regularity:
    kind: RegularityKind
    alpha: Optional[float] = None
    m: Optional[float] = None

    def __str__(self):
        """
        >>> str(Regularity(RegularityKind.SOBOLEV, 0.25, 2))
        'sobolev(0.25, 2)'
        """
        if self.kind is RegularityKind.HOELDER:
            return f"hoelder({self.alpha})"
        if self.kind is RegularityKind.SOBOLEV:
            return f"sobolev({self.alpha}, {self.m})"
        return self.kind.value


@dataclass(frozen=True, eq=False)
class DriftSpec:
    name: str
    dimension: int
    evaluator: Callable[[np.ndarray], np.ndarray]
    regularity: Regularity
    sup_norm_bound: float
    seminorm_bound: Optional[float] = None
    # Outside the bounded-drift assumptions; only usable against closed forms.
    oracle_only: bool = False
    params: Mapping = field(default_factory=dict)

    def __call__(self, x) -> np.ndarray:
        return self.evaluator(np.atleast_2d(np.asarray(x, dtype=float)))

    @property
    def is_bounded(self) -> bool:
        return math.isfinite(self.sup_norm_bound)


@dataclass(frozen=True, eq=False)
class DiffusionSpec:
    name: str
    dimension: int
    evaluator: Callable[[np.ndarray], np.ndarray]
    ellipticity_lambda: float
    # Bound on |sigma| + |grad sigma| + |grad^2 sigma|.
    c2_bound: float
    is_additive: bool = False
    # Same matrix everywhere; lets the scheme skip per-path matrix products.
    is_constant: bool = False
    oracle_only: bool = False
    params: Mapping = field(default_factory=dict)

    def __call__(self, x) -> np.ndarray:
        return self.evaluator(np.atleast_2d(np.asarray(x, dtype=float)))

    @property
    def is_elliptic(self) -> bool:
        return self.ellipticity_lambda > 0

    def constant_matrix(self) -> np.ndarray:
        if not self.is_constant:
            raise ValueError(f"Diffusion {self.name!r} is not constant")
        return self(np.zeros((1, self.dimension)))[0]


_DRIFTS: Dict[str, Callable[..., DriftSpec]] = {}
_DIFFUSIONS: Dict[str, Callable[..., DiffusionSpec]] = {}


def _drift(name: str):
    def register(builder):
        _DRIFTS[name] = builder
        return builder

    return register


def _diffusion(name: str):
    def register(builder):
        _DIFFUSIONS[name] = builder
        return builder

    return register


def drift_names():
    return sorted(_DRIFTS)


def diffusion_names():
    return sorted(_DIFFUSIONS)


def _vector(value, dimension: int, what: str) -> np.ndarray:
    vector = np.broadcast_to(np.asarray(value, dtype=float), (dimension,)).copy()
    if not np.all(np.isfinite(vector)):
        raise CoefficientError(f"{what} must be finite, got {value!r}")
    return vector


def _sobolev_order(params: Mapping, name: str):
    alpha = float(params.get("alpha", 0.25))
    m = float(params.get("m", 2))
    if not 0 < alpha < 1:
        raise CoefficientError(f"{name}: alpha must lie in (0, 1), got {alpha}")
    if m < 1:
        raise CoefficientError(f"{name}: m must be at least 1, got {m}")
    if alpha * m >= 1:
        raise CoefficientError(
            f"{name}: indicators only have finite seminorms for alpha*m < 1, "
            f"got alpha={alpha}, m={m}"
        )
    return alpha, m


@_drift("zero")
def _zero(dimension=1) -> DriftSpec:
    dimension = int(dimension)
    return DriftSpec(
        name="zero",
        dimension=dimension,
        evaluator=lambda x: np.zeros_like(x),
        regularity=Regularity(RegularityKind.SMOOTH),
        sup_norm_bound=0.0,
        seminorm_bound=0.0,
        params=dict(dimension=dimension),
    )


@_drift("constant")
def _constant(value=1.0, dimension=1) -> DriftSpec:
    dimension = int(dimension)
    c = _vector(value, dimension, "constant drift")
    return DriftSpec(
        name="constant",
        dimension=dimension,
        evaluator=lambda x: np.broadcast_to(c, x.shape).copy(),
        regularity=Regularity(RegularityKind.SMOOTH),
        sup_norm_bound=float(np.linalg.norm(c)),
        seminorm_bound=0.0,
        params=dict(value=c.tolist(), dimension=dimension),
    )


@_drift("linear_ou")
def _linear_ou(theta=1.0, dimension=1) -> DriftSpec:
    """b(x) = -theta x. Unbounded, so only ever run against closed forms."""
    dimension = int(dimension)
    theta = float(theta)
    if theta == 0:
        raise CoefficientError("linear_ou: theta must be nonzero (use 'zero')")
    return DriftSpec(
        name="linear_ou",
        dimension=dimension,
        evaluator=lambda x: -theta * x,
        regularity=Regularity(RegularityKind.SMOOTH),
        sup_norm_bound=math.inf,
        oracle_only=True,
        params=dict(theta=theta, dimension=dimension),
    )


@_drift("identity")
def _identity_drift(dimension=1) -> DriftSpec:
    """
    b(x) = x: ``linear_ou`` with theta = -1, and the linear quadrature test
    function.

    >>> builtin_drift("identity")(np.array([[2.0], [-0.5]])).ravel().tolist()
    [2.0, -0.5]
    """
    dimension = int(dimension)
    return DriftSpec(
        name="identity",
        dimension=dimension,
        evaluator=lambda x: np.array(x, dtype=float),
        regularity=Regularity(RegularityKind.SMOOTH),
        sup_norm_bound=math.inf,
        oracle_only=True,
        params=dict(dimension=dimension),
    )


@_drift("hoelder_cusp")
def _hoelder_cusp(beta=0.5, dimension=1) -> DriftSpec:
    """The bump (1 - |x|^beta)_+ on every component."""
    dimension = int(dimension)
    beta = float(beta)
    if not 0 < beta <= 1:
        raise CoefficientError(f"hoelder_cusp: beta must lie in (0, 1], got {beta}")

    def evaluate(x):
        radius = np.linalg.norm(x, axis=1, keepdims=True)
        bump = np.clip(1 - radius**beta, 0, None)
        return np.broadcast_to(bump, x.shape).copy()

    return DriftSpec(
        name="hoelder_cusp",
        dimension=dimension,
        evaluator=evaluate,
        regularity=Regularity(RegularityKind.HOELDER, alpha=beta),
        sup_norm_bound=math.sqrt(dimension),
        params=dict(beta=beta, dimension=dimension),
    )


@_drift("indicator_interval")
def _indicator_interval(pieces=((0.0, 1.0, 1.0),), alpha=0.25, m=2) -> DriftSpec:
    """
    A one-dimensional step function: a sum of heights on [left, right).

    >>> b = builtin_drift("indicator_interval", alpha=0.25, m=2)
    >>> b.seminorm_bound
    4.0
    >>> b(np.array([[-0.5], [0.0], [0.5], [1.0]])).ravel().tolist()
    [0.0, 1.0, 1.0, 0.0]
    """
    alpha, m = _sobolev_order(dict(alpha=alpha, m=m), "indicator_interval")
    try:
        pieces = [tuple(float(v) for v in piece) for piece in pieces]
    except (TypeError, ValueError) as e:
        raise CoefficientError(f"indicator_interval: bad pieces {pieces!r}") from e
    for piece in pieces:
        if len(piece) != 3:
            raise CoefficientError(
                f"indicator_interval: pieces are [left, right, height], got {piece}"
            )
        left, right, height = piece
        if not left < right or not math.isfinite(height):
            raise CoefficientError(f"indicator_interval: bad piece {piece}")

    def evaluate(x):
        out = np.zeros_like(x)
        for left, right, height in pieces:
            out += height * ((x >= left) & (x < right))
        return out

    # Every sum of pieces is attained just right of some breakpoint.
    probes = [e for piece in pieces for e in piece[:2] if math.isfinite(e)]
    probes += [min(probes) - 1] if probes else []
    sup_norm = max(
        (abs(float(evaluate(np.array([[p]]))[0, 0])) for p in probes), default=0.0
    )
    if not probes:
        sup_norm = abs(sum(height for _, _, height in pieces))

    return DriftSpec(
        name="indicator_interval",
        dimension=1,
        evaluator=evaluate,
        regularity=Regularity(RegularityKind.SOBOLEV, alpha=alpha, m=m),
        sup_norm_bound=sup_norm,
        seminorm_bound=step_function_seminorm(pieces, alpha, m),
        params=dict(pieces=[list(p) for p in pieces], alpha=alpha, m=m),
    )


@_drift("indicator_lipschitz_domain")
def _indicator_lipschitz_domain(
    dimension=2, center=0.0, radius=1.0, height=1.0, slope=0.0, alpha=0.25, m=2
) -> DriftSpec:
    """
    (height + slope * sum(x - center)) on the closed ball, zero outside, on
    every component.
    """
    dimension = int(dimension)
    alpha, m = _sobolev_order(dict(alpha=alpha, m=m), "indicator_lipschitz_domain")
    center = _vector(center, dimension, "indicator_lipschitz_domain center")
    radius = float(radius)
    height = float(height)
    slope = float(slope)
    if radius <= 0:
        raise CoefficientError(f"indicator_lipschitz_domain: radius {radius} <= 0")

    def evaluate(x):
        offset = x - center
        inside = np.linalg.norm(offset, axis=1, keepdims=True) <= radius
        profile = height + slope * offset.sum(axis=1, keepdims=True)
        return np.broadcast_to(np.where(inside, profile, 0.0), x.shape).copy()

    peak = abs(height) + abs(slope) * math.sqrt(dimension) * radius
    return DriftSpec(
        name="indicator_lipschitz_domain",
        dimension=dimension,
        evaluator=evaluate,
        regularity=Regularity(RegularityKind.SOBOLEV, alpha=alpha, m=m),
        sup_norm_bound=math.sqrt(dimension) * peak,
        params=dict(
            dimension=dimension,
            center=center.tolist(),
            radius=radius,
            height=height,
            slope=slope,
            alpha=alpha,
            m=m,
        ),
    )


@_drift("oscillatory_measurable")
def _oscillatory_measurable(height=1.0) -> DriftSpec:
    """
    1{sin(1/x) > 0}, with value 1 at the origin.

    >>> b = builtin_drift("oscillatory_measurable")
    >>> b(np.array([[0.0], [1.0], [-1.0]])).ravel().tolist()
    [1.0, 1.0, 0.0]
    """
    height = float(height)
    if not math.isfinite(height):
        raise CoefficientError("oscillatory_measurable: height must be finite")

    def evaluate(x):
        safe = np.where(x == 0, 1.0, x)
        return height * np.where(x == 0, 1.0, np.sin(1 / safe) > 0)

    return DriftSpec(
        name="oscillatory_measurable",
        dimension=1,
        evaluator=evaluate,
        regularity=Regularity(RegularityKind.BOUNDED_MEASURABLE),
        sup_norm_bound=abs(height),
        params=dict(height=height),
    )


def _import_callable(path: str) -> Callable:
    module_name, _, attribute = path.partition(":")
    if not module_name or not attribute:
        raise CoefficientError(f"Expected 'module:function', got {path!r}")
    try:
        return getattr(importlib.import_module(module_name), attribute)
    except (ImportError, AttributeError) as e:
        raise CoefficientError(f"Can't import custom coefficient {path!r}: {e}") from e


@_drift("custom")
def _custom(
    function,
    sup_norm_bound,
    dimension=1,
    regularity="bounded_measurable",
    alpha=None,
    m=None,
    seminorm_bound=None,
    oracle_only=False,
) -> DriftSpec:
    """
    A user drift, either a callable or a 'module:function' import path.

    It must be vectorised like the built-in evaluators. The declared sup-norm
    is spot-checked, nothing else is.
    """
    evaluator = _import_callable(function) if isinstance(function, str) else function
    try:
        kind = RegularityKind(regularity)
    except ValueError as e:
        raise CoefficientError(f"custom: unknown regularity {regularity!r}") from e
    spec = DriftSpec(
        name="custom",
        dimension=int(dimension),
        evaluator=evaluator,
        regularity=Regularity(
            kind,
            alpha=None if alpha is None else float(alpha),
            m=None if m is None else float(m),
        ),
        sup_norm_bound=float(sup_norm_bound),
        seminorm_bound=None if seminorm_bound is None else float(seminorm_bound),
        oracle_only=bool(oracle_only),
        params=dict(
            function=function if isinstance(function, str) else repr(function),
            sup_norm_bound=float(sup_norm_bound),
            dimension=int(dimension),
            regularity=regularity,
        ),
    )
    check_drift(spec)
    return spec


def builtin_drift(name: str, **params) -> DriftSpec:
    """
    Build a catalogue drift.

    >>> builtin_drift("zero", dimension=2).sup_norm_bound
    0.0
    >>> builtin_drift("bogus")  # doctest: +ELLIPSIS
    Traceback (most recent call last):
    ...
    emrates._coefficients.CoefficientError: Unknown drift 'bogus'. Known: constant, ...
    """
    try:
        builder = _DRIFTS[name]
    except KeyError:
        raise CoefficientError(
            f"Unknown drift {name!r}. Known: {', '.join(drift_names())}"
        ) from None
    try:
        spec = builder(**params)
    except TypeError as e:
        raise CoefficientError(f"Bad parameters for drift {name!r}: {e}") from e
    _LOG.debug("drift.build", name=name, regularity=str(spec.regularity))
    return spec


@_diffusion("identity")
def _identity(dimension=1) -> DiffusionSpec:
    dimension = int(dimension)
    eye = np.eye(dimension)
    return DiffusionSpec(
        name="identity",
        dimension=dimension,
        evaluator=lambda x: np.broadcast_to(eye, (len(x), dimension, dimension)),
        ellipticity_lambda=1.0,
        c2_bound=1.0,
        is_additive=True,
        is_constant=True,
        params=dict(dimension=dimension),
    )


@_diffusion("scaled_identity")
def _scaled_identity(scale=1.0, dimension=1) -> DiffusionSpec:
    """sigma = c I. A zero scale is degenerate and only good for oracle runs."""
    dimension = int(dimension)
    scale = float(scale)
    if not math.isfinite(scale):
        raise CoefficientError("scaled_identity: scale must be finite")
    matrix = scale * np.eye(dimension)
    return DiffusionSpec(
        name="scaled_identity",
        dimension=dimension,
        evaluator=lambda x: np.broadcast_to(matrix, (len(x), dimension, dimension)),
        ellipticity_lambda=abs(scale),
        c2_bound=abs(scale),
        is_additive=scale == 1.0,
        is_constant=True,
        oracle_only=scale == 0.0,
        params=dict(scale=scale, dimension=dimension),
    )


@_diffusion("sine_elliptic")
def _sine_elliptic(c=0.5, dimension=1) -> DiffusionSpec:
    """
    Diagonal 1 + c sin(x_i).

    >>> builtin_diffusion("sine_elliptic", c=0.5).ellipticity_lambda
    0.5
    """
    dimension = int(dimension)
    c = float(c)
    if not abs(c) < 1:
        raise CoefficientError(f"sine_elliptic: need |c| < 1, got {c}")

    def evaluate(x):
        out = np.zeros((len(x), dimension, dimension))
        diagonal = np.arange(dimension)
        out[:, diagonal, diagonal] = 1 + c * np.sin(x)
        return out

    return DiffusionSpec(
        name="sine_elliptic",
        dimension=dimension,
        evaluator=evaluate,
        ellipticity_lambda=1 - abs(c),
        c2_bound=1 + 3 * abs(c),
        params=dict(c=c, dimension=dimension),
    )


@_diffusion("gbm_test")
def _gbm_test(dimension=1) -> DiffusionSpec:
    """sigma(x) = diag(x): degenerate at the origin and unbounded."""
    dimension = int(dimension)

    def evaluate(x):
        out = np.zeros((len(x), dimension, dimension))
        diagonal = np.arange(dimension)
        out[:, diagonal, diagonal] = x
        return out

    return DiffusionSpec(
        name="gbm_test",
        dimension=dimension,
        evaluator=evaluate,
        ellipticity_lambda=0.0,
        c2_bound=math.inf,
        oracle_only=True,
        params=dict(dimension=dimension),
    )


@_diffusion("custom")
def _custom_diffusion(
    function, ellipticity_lambda, c2_bound, dimension=1, oracle_only=False
) -> DiffusionSpec:
    """
    A user diffusion, either a callable or a 'module:function' import path,
    returning (N, d, d) matrices.

    Its declared ellipticity and bound are spot-checked like a custom drift's
    sup-norm.
    """
    evaluator = _import_callable(function) if isinstance(function, str) else function
    ellipticity_lambda = float(ellipticity_lambda)
    c2_bound = float(c2_bound)
    if ellipticity_lambda < 0 or c2_bound < ellipticity_lambda:
        raise CoefficientError(
            f"custom: need 0 <= ellipticity_lambda <= c2_bound, "
            f"got {ellipticity_lambda} and {c2_bound}"
        )
    spec = DiffusionSpec(
        name="custom",
        dimension=int(dimension),
        evaluator=evaluator,
        ellipticity_lambda=ellipticity_lambda,
        c2_bound=c2_bound,
        oracle_only=bool(oracle_only),
        params=dict(
            function=function if isinstance(function, str) else repr(function),
            ellipticity_lambda=ellipticity_lambda,
            c2_bound=c2_bound,
            dimension=int(dimension),
        ),
    )
    check_diffusion(spec)
    return spec


def builtin_diffusion(name: str, **params) -> DiffusionSpec:
    try:
        builder = _DIFFUSIONS[name]
    except KeyError:
        raise CoefficientError(
            f"Unknown diffusion {name!r}. Known: {', '.join(diffusion_names())}"
        ) from None
    try:
        spec = builder(**params)
    except TypeError as e:
        raise CoefficientError(f"Bad parameters for diffusion {name!r}: {e}") from e
    _LOG.debug("diffusion.build", name=name, ellipticity=spec.ellipticity_lambda)
    return spec


def _spot_cloud(dimension: int, count: int, spread: float, seed: int) -> np.ndarray:
    lineage = SeedLineage(seed, 0, StreamTag.SPOT_CHECK)
    return spread * standard_normals(lineage, count * dimension).reshape(
        count, dimension
    )


def check_drift(spec: DriftSpec, samples: int = 4096, spread: float = 3.0, seed=0):
    """
    Spot-check that a drift is total, correctly shaped and within its sup-norm.
    """
    points = _spot_cloud(spec.dimension, samples, spread, seed)
    values = spec(points)
    if values.shape != points.shape:
        raise CoefficientError(
            f"Drift {spec.name!r} returned shape {values.shape} for {points.shape}"
        )
    if not np.all(np.isfinite(values)):
        raise CoefficientError(f"Drift {spec.name!r} is not finite on sample points")
    largest = float(np.linalg.norm(values, axis=1).max())
    if largest > spec.sup_norm_bound * (1 + 1e-12) + 1e-12:
        raise CoefficientError(
            f"Drift {spec.name!r} reaches {largest}, "
            f"above its declared bound {spec.sup_norm_bound}"
        )


def check_diffusion(
    spec: DiffusionSpec, samples: int = 4096, spread: float = 3.0, seed=0
):
    """
    Spot-check y* sigma sigma* y >= lambda^2 |y|^2 on a cloud of points.
    """
    points = _spot_cloud(spec.dimension, samples, spread, seed)
    matrices = np.asarray(spec(points), dtype=float)
    expected = (samples, spec.dimension, spec.dimension)
    if matrices.shape != expected:
        raise CoefficientError(
            f"Diffusion {spec.name!r} returned shape {matrices.shape}, not {expected}"
        )
    if not np.all(np.isfinite(matrices)):
        raise CoefficientError(
            f"Diffusion {spec.name!r} is not finite on sample points"
        )
    largest = float(np.linalg.norm(matrices, ord=2, axis=(1, 2)).max())
    if largest > spec.c2_bound * (1 + 1e-12) + 1e-12:
        raise CoefficientError(
            f"Diffusion {spec.name!r} reaches norm {largest}, "
            f"above its declared bound {spec.c2_bound}"
        )
    if not spec.is_elliptic:
        return
    smallest = np.linalg.eigvalsh(matrices @ np.swapaxes(matrices, 1, 2))[:, 0]
    worst = float(smallest.min())
    if worst < spec.ellipticity_lambda**2 * (1 - 1e-9):
        raise CoefficientError(
            f"Diffusion {spec.name!r} has sigma sigma* eigenvalue {worst}, "
            f"below lambda^2 = {spec.ellipticity_lambda ** 2}"
        )
