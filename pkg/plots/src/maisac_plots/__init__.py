"""Figure generation for movable-antenna ISAC sweep results."""

from .render import FIGURE_KINDS, PlotDataError, PlotSpec, aggregate, load_results, render

__all__ = ["FIGURE_KINDS", "PlotDataError", "PlotSpec", "aggregate", "load_results", "render"]

__version__ = "0.1.0"
