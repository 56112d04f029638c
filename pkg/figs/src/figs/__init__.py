"""Figure rendering for condlin experiment artifacts.

Consumes only the CSV/manifest files written by ``condlin all`` (or the
individual experiment subcommands); it never imports the integrator package.
"""

__version__ = "0.1.0"

from .dataio import RenderInputError
from .recipes import FIGURE_IDS, FigureRecipe, build_recipe
from .render import build_figure, render
