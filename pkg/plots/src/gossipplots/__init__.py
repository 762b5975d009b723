"""Publication-style figures from gossipopt experiment outputs.

This package is deliberately decoupled from the simulator: it consumes the
harness's CSV/JSON files and experiment configs only, and reimplements the
two scalar channel formulas it needs for the landscape figure.
"""

__version__ = "0.1.0"

from gossipplots.figures import FigureSpec, plot_convergence, plot_landscape, plot_trajectory

__all__ = ["__version__", "FigureSpec", "plot_convergence", "plot_landscape", "plot_trajectory"]
