"""
Experiment configuration documents.

One experiment per YAML document:

    schema_version: 1
    name: ou_oracle
    kind: rate_sweep
    theorem: oracle:classical
    drift: {name: linear_ou, params: {theta: 1.0}}
    diffusion: {name: identity}
    x0: [1.0]
    profile: oracle_only
    levels: [16, 32, 64, 128, 256, 512, 1024]
    paths: 10000
    ...
"""
import enum
import hashlib
import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Dict, FrozenSet, Mapping, Optional, Tuple, Union

import rapidjson
import structlog
from ruamel.yaml import YAML

from emrates._coefficients import (
    DiffusionSpec,
    DriftSpec,
    builtin_diffusion,
    builtin_drift,
)
from emrates._paths import DEFAULT_MEMORY_BUDGET
from emrates._scheme import (
    DEFAULT_REFERENCE_GAP,
    MINIMUM_REFERENCE_GAP,
    AssumptionProfile,
    IncompatibleAssumptions,
    ReferenceGapTooSmall,
    SdeSpec,
)

_LOG = structlog.get_logger()

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    def __init__(self, reason: str, key: Optional[str] = None):
        super().__init__(f"{key}: {reason}" if key else reason)
        self.reason = reason
        self.key = key


class ExperimentKind(enum.Enum):
    RATE_SWEEP = "rate_sweep"
    QUADRATURE_SWEEP = "quadrature_sweep"
    SOBOLEV_ESTIMATE = "sobolev_estimate"
    DENSITY_DIAGNOSTIC = "density_diagnostic"
    # A rate sweep against a closed-form solution.
    ORACLE_VALIDATION = "oracle_validation"

    @property
    def is_sweep(self) -> bool:
        return self in _SWEEPS


_SWEEPS = {
    ExperimentKind.RATE_SWEEP,
    ExperimentKind.QUADRATURE_SWEEP,
    ExperimentKind.ORACLE_VALIDATION,
}

_ALL_PROFILES = frozenset(AssumptionProfile)


@dataclass(frozen=True)
class TheoremRef:
    """The result an experiment exercises, with the bound it checks."""

    key: str
    citation: str
    quote: str
    kinds: FrozenSet[ExperimentKind]
    profiles: FrozenSet[AssumptionProfile]

    def as_doc(self) -> Dict[str, str]:
        return dict(key=self.key, citation=self.citation, quote=self.quote)


def _theorems(*refs: TheoremRef) -> Dict[str, TheoremRef]:
    return {ref.key: ref for ref in refs}


THEOREMS = _theorems(
    TheoremRef(
        "theorem:multiplicative",
        "Strong rate for multiplicative noise with bounded measurable drift",
        "(E sup_t |X_t - X^n_t|^p)^(1/p) <= N n^(-1/2 + eps)",
        frozenset({ExperimentKind.RATE_SWEEP}),
        frozenset({AssumptionProfile.MULTIPLICATIVE}),
    ),
    TheoremRef(
        "theorem:additive",
        "Strong rate for additive noise with fractional Sobolev drift",
        "(E sup_t |X_t - X^n_t|^p)^(1/p) <= N n^(-(1 + alpha)/2 + eps)",
        frozenset({ExperimentKind.RATE_SWEEP}),
        frozenset({AssumptionProfile.ADDITIVE_SOBOLEV}),
    ),
    TheoremRef(
        "corollary:indicator",
        "Indicators of Lipschitz domains as additive-noise drifts",
        "L_2 rate 3/4 - eps in dimension one, (d + 1)/(2d) - eps in general",
        frozenset({ExperimentKind.RATE_SWEEP}),
        frozenset({AssumptionProfile.ADDITIVE_SOBOLEV}),
    ),
    TheoremRef(
        "lemma:quadrature_additive",
        "Quadrature of Sobolev functions along Brownian paths",
        "n^(-(1 + alpha)/2 + eps) |t - s|^(1/2 + eps) S^(-d/(2m))",
        frozenset({ExperimentKind.QUADRATURE_SWEEP}),
        frozenset({AssumptionProfile.ADDITIVE_SOBOLEV}),
    ),
    TheoremRef(
        "corollary:quadrature_multiplicative",
        "Quadrature of bounded measurable functions along the scheme",
        "N |f|_B n^(-1/2 + 2 eps) |t - s|^(1/2 + eps)",
        frozenset({ExperimentKind.QUADRATURE_SWEEP}),
        frozenset({AssumptionProfile.MULTIPLICATIVE}),
    ),
    TheoremRef(
        "lemma:interpolation",
        "Interpolation between the sup-norm and a Sobolev seminorm",
        "[f] of order (alpha theta, m / theta) <= 2 |f|_B^(1 - theta) [f]^theta",
        frozenset({ExperimentKind.SOBOLEV_ESTIMATE}),
        _ALL_PROFILES,
    ),
    TheoremRef(
        "lemma:density",
        "Density estimate for the scheme",
        "|E G(X^n_t)| <= N |G|_{L_p} t^(-d/(2p))",
        frozenset({ExperimentKind.DENSITY_DIAGNOSTIC}),
        frozenset(
            {AssumptionProfile.MULTIPLICATIVE, AssumptionProfile.ADDITIVE_SOBOLEV}
        ),
    ),
    TheoremRef(
        "oracle:classical",
        "Classical rates for smooth coefficients",
        "rate 1 for additive noise, sharp rate 1/2 for multiplicative noise",
        frozenset(_SWEEPS),
        _ALL_PROFILES,
    ),
)


@dataclass(frozen=True)
class CoefficientRef:
    name: str
    params: Mapping[str, Any] = field(default_factory=dict)

    @classmethod
    def from_doc(cls, doc, key: str) -> "CoefficientRef":
        if isinstance(doc, str):
            return cls(doc)
        if not isinstance(doc, Mapping) or "name" not in doc:
            raise ConfigError("expected a catalogue name or {name, params}", key)
        _reject_unknown(doc, {"name", "params"}, key)
        return cls(str(doc["name"]), dict(doc.get("params") or {}))

    def to_doc(self):
        return dict(name=self.name, params=dict(self.params))

    def drift(self) -> DriftSpec:
        return builtin_drift(self.name, **self.params)

    def diffusion(self) -> DiffusionSpec:
        return builtin_diffusion(self.name, **self.params)


@dataclass(frozen=True)
class Acceptance:
    """A band on an experiment's headline value."""

    minimum: Optional[float] = None
    maximum: Optional[float] = None
    target: Optional[float] = None

    def verdict(self, value: float) -> bool:
        """
        >>> Acceptance(minimum=0.6, maximum=0.9).verdict(0.75)
        True
        >>> Acceptance(minimum=0.4).verdict(0.39)
        False
        """
        if not math.isfinite(value):
            return False
        if self.minimum is not None and value < self.minimum:
            return False
        if self.maximum is not None and value > self.maximum:
            return False
        return True

    def __str__(self):
        low = "-inf" if self.minimum is None else f"{self.minimum:g}"
        high = "inf" if self.maximum is None else f"{self.maximum:g}"
        return f"[{low}, {high}]"


@dataclass(frozen=True)
class QuadratureSettings:
    # "brownian", or "em" for the scheme of the experiment's SDE.
    process: str = "brownian"
    # Drift of the SDE when the process is "em". Defaults to f itself.
    process_drift: Optional[CoefficientRef] = None
    weight: Optional[CoefficientRef] = None
    statistic: str = "sup"
    interval: Tuple[float, float] = (0.0, 1.0)


@dataclass(frozen=True)
class SobolevSettings:
    alpha: float
    m: float
    thetas: Tuple[float, ...] = (0.25, 0.5, 0.75)
    truncation_radius: Optional[float] = None
    mesh: Optional[float] = None
    component: Optional[int] = None
    tolerance: float = 0.05


@dataclass(frozen=True)
class DensitySettings:
    center: float = 0.0
    half_width: float = 0.1
    level: int = 10
    times: Tuple[float, ...] = tuple(2.0**-k for k in range(10, 1, -1))
    n: Optional[int] = None


def _reject_unknown(doc: Mapping, known, key: Optional[str] = None):
    unknown = sorted(set(doc) - set(known))
    if unknown:
        raise ConfigError(f"unknown keys {unknown}", key)


def _section(cls, doc, key: str):
    if doc is None:
        return None
    if not isinstance(doc, Mapping):
        raise ConfigError("expected a mapping", key)
    known = {f.name for f in fields(cls)}
    _reject_unknown(doc, known, key)
    values = dict(doc)
    for name in ("process_drift", "weight"):
        if values.get(name) is not None:
            values[name] = CoefficientRef.from_doc(values[name], f"{key}.{name}")
    for name in ("thetas", "times", "interval"):
        if name in values:
            values[name] = tuple(float(v) for v in values[name])
    try:
        return cls(**values)
    except TypeError as e:
        raise ConfigError(str(e), key)


def normalise(value):
    """
    Canonical form of a document value: integral floats become ints.

    >>> normalise({"p": 2.0, "x0": [0.5, 1.0]})
    {'p': 2, 'x0': [0.5, 1]}
    """
    if isinstance(value, bool) or value is None:
        return value
    if isinstance(value, enum.Enum):
        return value.value
    if isinstance(value, float):
        return int(value) if value.is_integer() else value
    if isinstance(value, Mapping):
        return {str(k): normalise(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [normalise(v) for v in value]
    if isinstance(value, CoefficientRef):
        return normalise(value.to_doc())
    return value


def canonical_json(doc) -> str:
    return rapidjson.dumps(
        normalise(doc), sort_keys=True, number_mode=rapidjson.NM_NAN
    )


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and not n & (n - 1)


_DOC_KEYS = {
    "schema_version",
    "name",
    "kind",
    "theorem",
    "drift",
    "diffusion",
    "x0",
    "profile",
    "levels",
    "paths",
    "batches",
    "p",
    "reference_gap",
    "seed",
    "block_size",
    "budget_minutes",
    "memory_budget",
    "acceptance",
    "quadrature",
    "sobolev",
    "density",
}

# Run-time limits: they never change the results, so they aren't fingerprinted.
_UNFINGERPRINTED = ("budget_minutes", "memory_budget")


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    kind: ExperimentKind
    theorem: str
    drift: CoefficientRef
    diffusion: CoefficientRef = CoefficientRef("identity")
    x0: Optional[Tuple[float, ...]] = None
    profile: AssumptionProfile = AssumptionProfile.MULTIPLICATIVE
    levels: Tuple[int, ...] = ()
    paths: int = 1000
    batches: int = 8
    p: float = 2.0
    reference_gap: int = DEFAULT_REFERENCE_GAP
    seed: int = 0
    block_size: Optional[int] = None
    budget_minutes: float = 30.0
    memory_budget: int = DEFAULT_MEMORY_BUDGET
    acceptance: Optional[Acceptance] = None
    quadrature: Optional[QuadratureSettings] = None
    sobolev: Optional[SobolevSettings] = None
    density: Optional[DensitySettings] = None
    output_dir: Optional[Path] = None

    @classmethod
    def from_doc(cls, doc: Mapping, output_dir: Optional[Path] = None):
        if not isinstance(doc, Mapping):
            raise ConfigError("An experiment config must be a mapping")
        version = doc.get("schema_version")
        if version != SCHEMA_VERSION:
            raise ConfigError(
                f"unsupported schema version {version!r} (expected {SCHEMA_VERSION})",
                "schema_version",
            )
        _reject_unknown(doc, _DOC_KEYS)
        for required in ("name", "kind", "theorem", "drift"):
            if required not in doc:
                raise ConfigError("missing", required)

        try:
            kind = ExperimentKind(doc["kind"])
        except ValueError:
            known = ", ".join(k.value for k in ExperimentKind)
            raise ConfigError(f"unknown kind {doc['kind']!r} (one of {known})", "kind")
        try:
            profile = AssumptionProfile(doc.get("profile", "multiplicative"))
        except ValueError:
            raise ConfigError(f"unknown profile {doc.get('profile')!r}", "profile")

        acceptance = doc.get("acceptance")
        if acceptance is not None:
            _reject_unknown(acceptance, {"minimum", "maximum", "target"}, "acceptance")
            acceptance = Acceptance(**acceptance)

        x0 = doc.get("x0")
        values = dict(
            name=str(doc["name"]),
            kind=kind,
            theorem=str(doc["theorem"]),
            drift=CoefficientRef.from_doc(doc["drift"], "drift"),
            diffusion=CoefficientRef.from_doc(
                doc.get("diffusion", "identity"), "diffusion"
            ),
            x0=None if x0 is None else tuple(float(v) for v in x0),
            profile=profile,
            levels=tuple(int(n) for n in doc.get("levels") or ()),
            acceptance=acceptance,
            quadrature=_section(QuadratureSettings, doc.get("quadrature"), "quadrature"),
            sobolev=_section(SobolevSettings, doc.get("sobolev"), "sobolev"),
            density=_section(DensitySettings, doc.get("density"), "density"),
            output_dir=output_dir,
        )
        for key, convert in (
            ("paths", int),
            ("batches", int),
            ("p", float),
            ("reference_gap", int),
            ("seed", int),
            ("block_size", int),
            ("budget_minutes", float),
            ("memory_budget", int),
        ):
            if doc.get(key) is not None:
                values[key] = convert(doc[key])
        return cls(**values)

    def to_doc(self, fingerprinted_only: bool = False) -> Dict[str, Any]:
        """The canonical document form (what the fingerprint is taken over)."""
        doc = dict(
            schema_version=SCHEMA_VERSION,
            name=self.name,
            kind=self.kind.value,
            theorem=self.theorem,
            drift=self.drift.to_doc(),
            diffusion=self.diffusion.to_doc(),
            x0=None if self.x0 is None else list(self.x0),
            profile=self.profile.value,
            levels=list(self.levels),
            paths=self.paths,
            batches=self.batches,
            p=self.p,
            reference_gap=self.reference_gap,
            seed=self.seed,
            block_size=self.effective_block_size,
            budget_minutes=self.budget_minutes,
            memory_budget=self.memory_budget,
        )
        for name in ("acceptance", "quadrature", "sobolev", "density"):
            section = getattr(self, name)
            if section is not None:
                doc[name] = {f.name: getattr(section, f.name) for f in fields(section)}
        if fingerprinted_only:
            for key in _UNFINGERPRINTED:
                del doc[key]
        return normalise(doc)

    @property
    def fingerprint(self) -> str:
        canonical = canonical_json(self.to_doc(fingerprinted_only=True))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    @property
    def theorem_ref(self) -> TheoremRef:
        try:
            return THEOREMS[self.theorem]
        except KeyError:
            raise ConfigError(
                f"unknown theorem {self.theorem!r} (one of {', '.join(THEOREMS)})",
                "theorem",
            )

    @property
    def batch_paths(self) -> int:
        return self.paths // self.batches

    @property
    def effective_block_size(self) -> int:
        return self.block_size or self.batch_paths

    @property
    def reference_level(self) -> int:
        """Level of the driving lattice: the finest grid plus the gap."""
        return max(self.levels).bit_length() - 1 + self.reference_gap

    def with_overrides(
        self,
        seed: Optional[int] = None,
        paths: Optional[int] = None,
        output_dir: Optional[Path] = None,
    ) -> "ExperimentConfig":
        changes = {}
        if seed is not None:
            changes["seed"] = seed
        if paths is not None:
            changes["paths"] = paths
            # Keep the block layout valid for the smaller run.
            if self.block_size and (paths // self.batches) % self.block_size:
                changes["block_size"] = None
        if output_dir is not None:
            changes["output_dir"] = Path(output_dir)
        return replace(self, **changes)

    def build_function(self) -> DriftSpec:
        return self.drift.drift()

    def build_spec(self) -> SdeSpec:
        """The SDE of this experiment (for quadrature, the process's SDE)."""
        drift = self.drift
        if self.quadrature is not None and self.quadrature.process_drift is not None:
            drift = self.quadrature.process_drift
        built = drift.drift()
        x0 = self.x0 if self.x0 is not None else (0.0,) * built.dimension
        return SdeSpec(built, self.diffusion.diffusion(), x0, self.profile)

    def validate(self) -> "ExperimentConfig":
        """
        Check the document is consistent, raising ConfigError (or the
        coefficient and assumption errors of building its SDE).
        """
        if self.kind.is_sweep:
            self._validate_levels()
        if self.paths < 1 or self.batches < 1:
            raise ConfigError("paths and batches must be positive")
        if self.paths % self.batches:
            raise ConfigError(
                f"{self.paths} paths don't split into {self.batches} batches", "paths"
            )
        if self.batch_paths % self.effective_block_size:
            raise ConfigError(
                f"batches of {self.batch_paths} paths don't split into blocks "
                f"of {self.effective_block_size}",
                "block_size",
            )
        if self.p <= 0:
            raise ConfigError(f"must be positive, got {self.p}", "p")
        if not 0 <= self.seed < 2**64:
            raise ConfigError(f"must be a u64, got {self.seed}", "seed")

        theorem = self.theorem_ref
        if self.kind not in theorem.kinds:
            raise IncompatibleAssumptions(
                f"{theorem.key} is not exercised by a {self.kind.value} experiment"
            )
        if self.profile not in theorem.profiles:
            raise IncompatibleAssumptions(
                f"{theorem.key} needs profile "
                f"{' or '.join(sorted(p.value for p in theorem.profiles))}, "
                f"not {self.profile.value}"
            )

        spec = self.build_spec()
        if self.kind is ExperimentKind.ORACLE_VALIDATION and spec.closed_form is None:
            raise ConfigError(
                f"{spec.drift.name}/{spec.diffusion.name} has no closed-form solution",
                "kind",
            )
        if self.kind is ExperimentKind.SOBOLEV_ESTIMATE and self.sobolev is None:
            raise ConfigError("a sobolev_estimate needs a sobolev section", "sobolev")
        if self.kind is ExperimentKind.QUADRATURE_SWEEP:
            settings = self.quadrature or QuadratureSettings()
            if settings.process not in ("brownian", "em"):
                raise ConfigError(
                    f"unknown process {settings.process!r}", "quadrature.process"
                )
            self.build_function()
        _LOG.debug("config.valid", name=self.name, fingerprint=self.fingerprint)
        return self

    def _validate_levels(self):
        levels = self.levels
        if len(levels) < 3:
            raise ConfigError("a sweep needs at least three levels", "levels")
        if not all(_is_power_of_two(n) for n in levels):
            raise ConfigError(f"levels must be powers of two: {list(levels)}", "levels")
        if any(a >= b for a, b in zip(levels, levels[1:])):
            raise ConfigError(
                f"levels must be strictly increasing: {list(levels)}", "levels"
            )
        if self.reference_gap < MINIMUM_REFERENCE_GAP:
            raise ReferenceGapTooSmall(
                f"reference_gap {self.reference_gap} is below the minimum "
                f"of {MINIMUM_REFERENCE_GAP}"
            )


def load_config(
    path: Union[str, Path], output_dir: Optional[Path] = None
) -> ExperimentConfig:
    path = Path(path)
    try:
        with path.open("r", encoding="utf-8") as f:
            doc = YAML(typ="safe").load(f)
    except OSError as e:
        raise ConfigError(f"can't read {path}: {e.strerror}")
    except Exception as e:
        raise ConfigError(f"{path} is not a valid YAML document: {e}")
    _LOG.debug("config.load", path=str(path))
    return ExperimentConfig.from_doc(doc, output_dir=output_dir)
