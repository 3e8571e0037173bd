"""Exception hierarchy shared by all modules."""


class LabError(Exception):
    """Base class for every error raised by the package."""


class DomainError(LabError):
    """A point or a support falls outside the admissible region of a grid."""


class ResolutionError(LabError):
    """A scale or a quadrature is too coarse for the requested operation."""


class ParameterError(LabError):
    """Invalid kernel or problem parameters.

    ``best`` optionally carries the best feasible iterate found before failing.
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class PreconditionError(LabError):
    """An input violates a structural requirement (radial kernel, half support, ...)."""


class ClassificationError(LabError):
    """A blow-up profile could not be used because it was not resolved."""


class InputError(LabError):
    """Malformed or inconsistent user input."""


class RegistryError(LabError):
    """Unknown scenario identifier."""


class StageError(LabError):
    """A module error raised inside an experiment, tagged with the stage that failed."""

    def __init__(self, stage, cause):
        super().__init__(f"stage {stage!r} failed: {type(cause).__name__}: {cause}")
        self.stage = stage
        self.cause = cause
        self.bundle = None
