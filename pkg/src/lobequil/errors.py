"""Exception hierarchy shared across the package."""


class LobequilError(Exception):
    """Base class for all package errors."""


class DomainError(LobequilError):
    """An argument lies outside the mathematical domain of an operation."""


class ModelViolationError(LobequilError):
    """A parameterization breaks the structural assumptions of the book model
    (e.g. a non-positive density denominator)."""


class AdmissibilityError(LobequilError):
    """A purchase strategy would drive the book volume negative.

    ``time`` is the first mesh time at which the violation occurs.
    """

    def __init__(self, message: str, time: float | None = None):
        super().__init__(message)
        self.time = time


class SimulationError(LobequilError):
    """A simulated sample became non-finite; ``step`` reports the mesh index."""

    def __init__(self, message: str, step: int | None = None):
        super().__init__(message)
        self.step = step


class ConfigurationError(LobequilError):
    """Invalid run configuration (bad key, failed invariant, CFL violation)."""


class SolverError(LobequilError):
    """Numerical failure inside the backward sweep."""
