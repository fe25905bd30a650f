"""Exception hierarchy.  The CLI maps these onto exit codes."""


class ValidationError(ValueError):
    """Bad input or configuration (CLI exit code 2)."""


class ConfigError(ValidationError):
    """Malformed experiment configuration; ``key`` names the offending entry."""

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key


class CFLError(ValidationError):
    """Explicit scheme would lose monotonicity."""

    def __init__(self, message, max_dt):
        super().__init__(message)
        self.max_dt = max_dt


class NumericalAbort(RuntimeError):
    """A numerical procedure gave up (CLI exit code 3).

    ``stage`` identifies where it happened, ``diagnostics`` carries whatever
    the caller needs to inspect (error sequences, offending states, ...).
    """

    def __init__(self, message, stage=None, diagnostics=None):
        super().__init__(message)
        self.stage = stage
        self.diagnostics = diagnostics or {}


class MemoryBudgetError(ValidationError):
    pass
