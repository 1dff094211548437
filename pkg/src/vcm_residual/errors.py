"""Exception hierarchy shared by all modules."""


class VcmError(Exception):
    """Base class for every error raised by this package."""


class InvalidParams(VcmError, ValueError):
    pass


class ImageTooSmall(VcmError, ValueError):
    pass


class DimensionMismatch(VcmError, ValueError):
    pass


class FrameIdMismatch(VcmError, ValueError):
    pass


class IndexOutOfRange(VcmError, IndexError):
    """A residual references a decoded keypoint that does not exist."""


class EmptyOriginalSet(VcmError, ValueError):
    pass


class StreamError(VcmError, ValueError):
    """Base class for residual bitstream parse failures."""


class BadMagic(StreamError):
    pass


class UnsupportedVersion(StreamError):
    pass


class TruncatedStream(StreamError):
    pass


class InvariantViolation(StreamError):
    """Structurally decodable data that breaks a residual invariant."""


class MissingFrames(VcmError):
    pass


class UnreadableFile(VcmError, OSError):
    pass


class EmptyRun(VcmError, ValueError):
    pass


class MixedQp(VcmError, ValueError):
    pass


class DegenerateInput(VcmError, ValueError):
    pass
