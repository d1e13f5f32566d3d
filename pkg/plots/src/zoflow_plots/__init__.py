from .render import PlotSpec, SchemaError, load_table, render

__version__ = "0.1.0"

__all__ = ["PlotSpec", "SchemaError", "load_table", "render"]
