"""Figure rendering for the metaorder flow/impact pipeline CSVs."""

from .loaders import SchemaError
from .render import FIGURE_IDS, FigureSpec, correlation_two_term, fit_two_term_correlation, render

__version__ = "0.1.0"
