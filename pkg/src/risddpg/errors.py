"""Exception types shared across modules."""


class ConfigError(ValueError):
    """Invalid experiment configuration. ``path`` names the offending field."""

    def __init__(self, message: str, path: str | None = None):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class StateError(RuntimeError):
    """An object was used before it was initialised, or with stale data."""
