"""Exception types shared across the simulator."""


class SimError(Exception):
    """Base class for all simulator errors."""


class ConfigError(SimError, ValueError):
    """Invalid configuration value or combination."""


class OutOfMemoryError(SimError):
    """No free physical frame is left to satisfy an allocation."""


class FrameStateError(SimError):
    """A frame was claimed while occupied or released while free."""


class PageFault(SimError):
    """Translation was requested for an unmapped virtual page."""

    def __init__(self, vpn: int) -> None:
        super().__init__(f"page fault: vpn {vpn:#x} is not mapped")
        self.vpn = vpn


class AlreadyMappedError(SimError):
    """map_page was called for a page that already has a mapping."""


class TraceError(SimError):
    """Malformed trace input."""

    def __init__(self, message: str, lineno: int | None = None) -> None:
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)
        self.lineno = lineno
