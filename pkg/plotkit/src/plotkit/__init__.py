"""Figures and tables from auxmc run CSVs.

Consumes only the documented CSV contract (the per-step RunRecord schema and
the ESS summary schema); every statistic beyond replicate means and maxima
is computed upstream.
"""

from .figures import FigureSpec, SchemaError, plot_accuracy_panels, plot_mse_panels
from .tables import table_ess

__all__ = [
    "FigureSpec",
    "SchemaError",
    "plot_accuracy_panels",
    "plot_mse_panels",
    "table_ess",
]
__version__ = "0.1.0"
