"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Invalid problem setup or config input (grid/spec/file)."""


class SolverError(RuntimeError):
    """An iterative solver could not do its job (bracket exhausted, ...)."""


class NumericalBlowupError(RuntimeError):
    """NaN/Inf appeared during time stepping."""

    def __init__(self, t, message=None):
        self.t = float(t)
        super().__init__(message or f"non-finite density at t={self.t:.6g}")
