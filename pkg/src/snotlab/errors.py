"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Invalid dataset, noise, schedule, or training configuration."""


class CapacityError(RuntimeError):
    """Instance exceeds a configured size cap (e.g. cost-matrix entries)."""


class TrainingFault(RuntimeError):
    """Training diverged or produced non-finite values.

    Carries a diagnostic record (iteration, loss, eps, ...) in ``record``.
    """

    def __init__(self, message: str, record: dict | None = None):
        super().__init__(message)
        self.record = record or {}


class SolverStall(RuntimeError):
    """The simplex pivot loop hit its iteration cap; retried with perturbed
    weights before surfacing to the caller."""
