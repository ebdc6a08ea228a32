"""Figures for the blended quasicontinuum benchmark outputs."""

__version__ = "0.1.0"

from .figures import FigureSpec, render_convergence, render_lattice
from .io import FormatError, read_dump, read_records_csv

__all__ = ["FigureSpec", "render_convergence", "render_lattice",
           "FormatError", "read_dump", "read_records_csv", "__version__"]
