"""Hot numerical kernels with a numba fast path and a pure-numpy fallback.

The backend is chosen once at import time from the ``BQCE_BACKEND``
environment variable: ``numba`` (default when numba imports cleanly) or
``numpy``. Both backends expose the same functions with identical
semantics; ``benchmarks/benchmark_kernels.py`` compares their speed.
"""

import os

try:
    import numba  # noqa: F401

    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover - exercised only without numba
    NUMBA_AVAILABLE = False

_requested = os.environ.get("BQCE_BACKEND", "").strip().lower()
if _requested not in ("", "numba", "numpy"):
    raise ValueError(
        f"BQCE_BACKEND must be 'numba' or 'numpy', got {_requested!r}"
    )
if _requested == "numba" and not NUMBA_AVAILABLE:
    raise ImportError("BQCE_BACKEND=numba requested but numba is not importable")

STATUS_OK = 0
STATUS_COINCIDENT = 1

if _requested == "numpy" or not NUMBA_AVAILABLE:
    BACKEND = "numpy"
    from ._numpy import (
        bfs_hops,
        clip_cell_areas,
        eam_energy,
        eam_energy_gradient,
        eam_hessian_triplets,
        eam_site_energies,
        locate_points,
    )
else:
    BACKEND = "numba"
    from ._numba import (
        bfs_hops,
        clip_cell_areas,
        eam_energy,
        eam_energy_gradient,
        eam_hessian_triplets,
        eam_site_energies,
        locate_points,
    )

__all__ = [
    "BACKEND",
    "NUMBA_AVAILABLE",
    "STATUS_OK",
    "STATUS_COINCIDENT",
    "bfs_hops",
    "clip_cell_areas",
    "eam_energy",
    "eam_energy_gradient",
    "eam_hessian_triplets",
    "eam_site_energies",
    "locate_points",
]
