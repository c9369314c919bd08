"""Exception types shared across the package."""


class SolverError(RuntimeError):
    """Equilibrium solve failed (singular system or iterative nonconvergence)."""


class OptimizerError(RuntimeError):
    """Density update failed (e.g. the bisection could not bracket the multiplier)."""


class TrainingError(RuntimeError):
    """Model training diverged or produced non-finite gradients."""


class BuildError(ValueError):
    """Architecture could not be built; message names the offending layer."""


class FormatError(ValueError):
    """A serialized file is corrupt, truncated, or from an incompatible version."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset
