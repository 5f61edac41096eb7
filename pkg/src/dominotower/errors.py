"""Exception hierarchy shared by all modules.

Each class carries the process exit code the CLI maps it to.
"""


class DominoTowerError(Exception):
    exit_code = 1


class ValidationError(DominoTowerError, ValueError):
    """Malformed input: undeclared symbols, broken invariants, bad overrides."""

    exit_code = 2


class DomainError(ValidationError):
    """An argument lies outside the domain where the operation is defined."""


class OutsideDomain(DomainError):
    """A point lies in no square of a piecewise affine system."""

    def __init__(self, point):
        super().__init__(f"point {point} lies outside every square")
        self.point = point


class UnsupportedError(ValidationError):
    pass


class ResourceError(DominoTowerError):
    """A configured size, bit or state cap was exceeded."""

    exit_code = 3

    def __init__(self, message, *, bound=None, reached=None):
        super().__init__(message)
        self.bound = bound
        self.reached = reached


class InfeasibleError(DominoTowerError):
    exit_code = 4

    def __init__(self, message, *, needed=None):
        super().__init__(message)
        self.needed = needed


class DeterminismError(DominoTowerError):
    """Cone-type data failed the transition-determinism check."""

    exit_code = 4
