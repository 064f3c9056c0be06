"""Figure rendering for the merging-analysis CSV bundles.

Strictly presentational: every number drawn comes straight out of the
bundle files (boxplots are fed precomputed quartiles, fences, and
outliers; heatmaps redraw the stored divergence values).  Nothing is
recomputed here, so the figures can never drift from the tables.
"""

import matplotlib

matplotlib.use("Agg")

__version__ = "0.1.0"

from .contracts import ContractError, load_bundle_csv  # noqa: E402
from .render import (FigureBundle, render, render_all)  # noqa: E402

__all__ = ["__version__", "ContractError", "load_bundle_csv",
           "FigureBundle", "render", "render_all"]
