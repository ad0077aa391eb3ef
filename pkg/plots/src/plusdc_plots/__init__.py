"""Figures for multiway-comparison experiment outputs.

Consumes the tidy CSV and JSON files written by the `plusdc` command
line (consistency studies, cross-validation tables, fitted parameters)
purely as documented file formats; no fitting code is imported or run.
"""

from .figures import age_effect_curve, plot_age_effect, plot_consistency, plot_cv
from .readers import (
    SchemaError,
    aggregate_consistency,
    aggregate_cv,
    read_consistency_csv,
    read_cv_csv,
    read_params_json,
)

__version__ = "0.1.0"

__all__ = [
    "SchemaError",
    "age_effect_curve",
    "aggregate_consistency",
    "aggregate_cv",
    "plot_age_effect",
    "plot_consistency",
    "plot_cv",
    "read_consistency_csv",
    "read_cv_csv",
    "read_params_json",
    "__version__",
]
