"""Offline figure generation for solver benchmark CSV artifacts."""

from .figure import two_panel
from .spectra import condition_number, plot_spectra
from .traces import plot_traces

__all__ = ["condition_number", "plot_spectra", "plot_traces", "two_panel"]

__version__ = "0.1.0"
