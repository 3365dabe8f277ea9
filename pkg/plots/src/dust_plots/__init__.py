"""Figure rendering over the versioned dust-coalescent CSV/JSON artifacts."""

from .render import FigureSpec, SchemaError, load_spec, render

__all__ = ["FigureSpec", "SchemaError", "load_spec", "render"]

__version__ = "0.1.0"
