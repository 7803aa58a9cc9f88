"""Exception types raised by the library."""


class MatronMatchError(Exception):
    pass


class ShapeError(MatronMatchError, ValueError):
    """Array dimensions do not agree."""


class DomainError(MatronMatchError, ValueError):
    """Evaluation outside the effective domain (empty set, +inf value, ...)."""


class ContractError(MatronMatchError, ValueError):
    """An input violates a documented contract (e.g. g(empty) != 0)."""


class SizeError(MatronMatchError, ValueError):
    """A brute-force lattice exceeds its size budget."""


class ConditioningError(MatronMatchError, ValueError):
    """A matrix is singular or too badly conditioned to use."""


class IterationLimitError(MatronMatchError, RuntimeError):
    """An iterative solver hit its iteration cap.

    ``residuals`` carries the diagnostics at the last iterate.
    """

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = dict(residuals or {})


class SolverIntegrityError(MatronMatchError, RuntimeError):
    """A welfare oracle returned a point that fails its own optimality certificate."""


class StateError(MatronMatchError, RuntimeError):
    """An object is in the wrong state for the requested operation."""


class SchemaError(MatronMatchError, ValueError):
    """A JSON document does not match the expected file format."""
