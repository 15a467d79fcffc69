"""meshfig: deterministic figures from meshlm diagnostic report CSVs."""

from .render import FigureSpec, build_figure, render
from .schemas import KINDS, SchemaError, load_rows

__all__ = ["FigureSpec", "build_figure", "render", "KINDS", "SchemaError",
           "load_rows"]
