from .render import CSV_COLUMNS, FigureSpec, SchemaMismatch, render

__all__ = ["CSV_COLUMNS", "FigureSpec", "SchemaMismatch", "render"]
__version__ = "0.1.0"
