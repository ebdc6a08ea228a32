"""Exception types raised by the simulation engine."""


class ConstructionError(ValueError):
    """Domain, blend or mesh construction received inconsistent inputs."""


class EvaluationError(RuntimeError):
    """An energy evaluation hit a corrupted state (e.g. coincident atoms)."""


class MeshError(RuntimeError):
    """Mesh generation failed to satisfy its structural guarantees."""


class AssemblyError(RuntimeError):
    """Energy assembly detected an invalid state (e.g. element inversion)."""


class SolverError(RuntimeError):
    """The minimizer detected an inconsistent objective or a bad state."""
