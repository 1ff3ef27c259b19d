"""Figure rendering for atomloss sweep outputs."""

from .figures import FigureSpec, render

__all__ = ["FigureSpec", "render"]
__version__ = "0.1.0"
