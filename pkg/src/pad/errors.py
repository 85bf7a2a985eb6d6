"""Exception types shared across the toolkit.

Argument validation failures raise plain ``ValueError``; the classes here
cover domain failures a caller may want to handle separately.
"""


class PadError(Exception):
    """Base class for toolkit-specific failures."""


class ImageIOError(PadError):
    """An image file could not be read, decoded, or written."""


class CodecError(PadError):
    """An in-memory JPEG encode/decode round trip failed."""


class EmptyWindowError(PadError):
    """Two windows share no overlap, so no pixel pairs exist."""


class DegenerateGridError(PadError):
    """The image yields fewer than two analysis tiles."""


class ProviderError(PadError):
    """A region provider could not deliver proposals."""

    def __init__(self, kind: str, message: str):
        super().__init__(f"{kind} provider: {message}")
        self.kind = kind


class ProtocolViolationError(ProviderError):
    """A segmentation sidecar response violates the wire protocol."""

    def __init__(self, message: str):
        super().__init__("sidecar", message)
