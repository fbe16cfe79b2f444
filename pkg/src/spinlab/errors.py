"""Exception types shared across modules; the CLI maps them to exit codes."""


class SpinlabError(Exception):
    """Base class for library errors."""


class CapacityError(SpinlabError):
    """A requested computation exceeds a configured size cap."""


class ConfigError(SpinlabError, ValueError):
    """An experiment configuration is malformed."""
