from ._density import (
    DensityRow,
    IndicatorBump,
    density_block_sums,
    density_bound_diagnostic,
    density_rows,
)
from ._errors import CouplingViolation, error_block_sums, path_errors, strong_error
from ._model import (
    ErrorTable,
    QuadratureSample,
    RateFit,
    Statistic,
    WeightKind,
    empirical_norm,
)
from ._quadrature import (
    BROWNIAN,
    discrete_linear_variance,
    quadrature_block_sums,
    quadrature_functional,
    quadrature_rate_sweep,
    quadrature_table,
    quadrature_values,
)
from ._rates import RateFitError, fit_rate

__all__ = (
    "BROWNIAN",
    "CouplingViolation",
    "DensityRow",
    "ErrorTable",
    "IndicatorBump",
    "QuadratureSample",
    "RateFit",
    "RateFitError",
    "Statistic",
    "WeightKind",
    "density_block_sums",
    "density_bound_diagnostic",
    "density_rows",
    "discrete_linear_variance",
    "empirical_norm",
    "error_block_sums",
    "fit_rate",
    "path_errors",
    "quadrature_block_sums",
    "quadrature_functional",
    "quadrature_rate_sweep",
    "quadrature_table",
    "quadrature_values",
    "strong_error",
)
