"""Exception types shared by the surface, codebook, channel, handover and sim modules."""


class DomainError(ValueError):
    """An input lies outside the domain an operation is defined on."""


class ConfigError(ValueError):
    """A scenario or codebook configuration cannot be resolved."""

    def __init__(self, message: str, key_path: str | None = None):
        self.key_path = key_path
        if key_path:
            message = f"{key_path}: {message}"
        super().__init__(message)


class CodebookError(ValueError):
    """A codebook file does not belong to the requested geometry."""


class CodebookParseError(CodebookError):
    def __init__(self, message: str, offset: int):
        self.offset = offset
        super().__init__(f"{message} (byte offset {offset})")


class ProtocolError(RuntimeError):
    """A state machine received an event that is illegal in its current state."""

    def __init__(self, state: str, event: str, protocol: str = ""):
        self.state = state
        self.event = event
        where = f"{protocol} " if protocol else ""
        super().__init__(f"illegal transition: {where}state '{state}' cannot handle event '{event}'")


class TraceReplayError(RuntimeError):
    """A replayed trace has no record for a query the engine makes."""
