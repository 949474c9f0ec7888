"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Rejected input: bad dimensions, invalid parameters, broken invariants."""


class ScenarioFormatError(ValidationError):
    """Scenario file problem; ``field`` holds the offending key path."""

    def __init__(self, message, field=None):
        super().__init__(message if field is None else f"{field}: {message}")
        self.field = field


class NumericalFault(RuntimeError):
    """Numerical failure: singular inertia, lost control authority, divergence."""


class DivergenceFault(NumericalFault):
    """Simulation produced non-finite state; ``t`` is the failing time stamp."""

    def __init__(self, message, t):
        super().__init__(f"{message} (t={t:.6f} s)")
        self.t = t
