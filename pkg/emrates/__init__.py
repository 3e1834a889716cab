try:
    from ._version import version as __version__
except ImportError:
    __version__ = "Unknown/Not Installed"

from ._canned import canned, list_canned
from ._coefficients import builtin_diffusion, builtin_drift
from ._config import ExperimentConfig, load_config
from ._paths import SeedLineage, coarsen, generate_lattice, refine, value_at
from ._report import ResultRecord, emit_csv
from ._runner import run
from ._scheme import SdeSpec, em_solve, reference_solution

__all__ = (
    "ExperimentConfig",
    "ResultRecord",
    "SdeSpec",
    "SeedLineage",
    "__version__",
    "builtin_diffusion",
    "builtin_drift",
    "canned",
    "coarsen",
    "em_solve",
    "emit_csv",
    "generate_lattice",
    "list_canned",
    "load_config",
    "reference_solution",
    "refine",
    "run",
    "value_at",
)
