"""Figure rendering for demon-sim study outputs (CSV + manifest in, image out)."""

__version__ = "0.1.0"

from .render import FigureJob, RenderError, render, render_all
