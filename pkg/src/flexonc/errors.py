"""Exception types raised by the simulator."""


class ConfigurationError(ValueError):
    """Invalid topology, flow, or run configuration.

    ``field`` names the offending configuration key when known.
    """

    def __init__(self, message, field=None):
        super().__init__(message if field is None else f"{field}: {message}")
        self.field = field


class PreconditionError(ValueError):
    """An operation was called outside its documented domain."""
