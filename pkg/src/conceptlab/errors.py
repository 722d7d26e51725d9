"""Exception types shared across the package."""


class NumericFailure(RuntimeError):
    """A computation produced non-finite values or an unsolvable system."""

    def __init__(self, message, step=None, condition=None):
        if step is not None:
            message = f"{message} (step {step})"
        if condition is not None:
            message = f"{message} (condition estimate {condition:.3e})"
        super().__init__(message)
        self.step = step
        self.condition = condition


class ConfigError(ValueError):
    """A run configuration failed validation; carries the offending field path."""

    def __init__(self, message, field=None):
        if field is not None:
            message = f"{field}: {message}"
        super().__init__(message)
        self.field = field


class DependencyError(RuntimeError):
    """A pipeline stage is missing an upstream artifact."""

    def __init__(self, message, path=None):
        super().__init__(message)
        self.path = path
