"""Blended quasicontinuum (BQCE) simulation engine for a 2D EAM lattice.

Couples an embedded-atom model on a triangular lattice to a Cauchy-Born
finite-element continuum through a per-site blending function, minimizes
the blended energy with a preconditioned CG + Newton pipeline, and ships
a convergence benchmark harness for microcrack and di-vacancy defects.
"""

__version__ = "0.1.0"

from .eam import EamModel
from .kernels import BACKEND, NUMBA_AVAILABLE

__all__ = ["EamModel", "BACKEND", "NUMBA_AVAILABLE", "__version__"]
