class SeizureACSError(Exception):
    """Base class for errors raised by this package."""


class DataError(SeizureACSError):
    """Malformed or inconsistent input data (files, manifests, labels)."""

    def __init__(self, reason, path=None):
        self.reason = reason
        self.path = str(path) if path is not None else None
        msg = f"{self.path}: {reason}" if self.path else reason
        super().__init__(msg)


class ConfigError(SeizureACSError):
    """Invalid configuration value. ``field`` names the offending key."""

    def __init__(self, field, reason, line=None):
        self.field = field
        self.reason = reason
        self.line = line
        where = f" (line {line})" if line is not None else ""
        super().__init__(f"{field}: {reason}{where}")


class NumericalError(SeizureACSError):
    """An iterative numerical routine failed to converge."""
