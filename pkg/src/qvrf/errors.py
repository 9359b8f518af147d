"""Exception hierarchy shared by the codec modules."""


class QVRFError(Exception):
    """Base class for every error raised by this package."""


class ConfigurationError(QVRFError, ValueError):
    """A parameter lies outside the range the codec supports."""


class NonEncodableError(QVRFError, ValueError):
    """Input data cannot be represented in the bitstream."""


class DecodeError(QVRFError, ValueError):
    """A bitstream is malformed and cannot be decoded."""


class StreamExhaustedError(DecodeError):
    """The decoder needed more bytes than the stream holds."""


class SingularFitError(QVRFError, ValueError):
    pass


class NonMonotoneRegulatorsError(QVRFError, ValueError):
    """Optimized regulators are not strictly increasing in lambda."""

    def __init__(self, lambdas, values):
        self.lambdas = tuple(lambdas)
        self.values = tuple(values)
        pairs = ", ".join(f"{lam:g}->{a:.6g}" for lam, a in zip(self.lambdas, self.values))
        super().__init__(f"regulator vector is not strictly increasing: {pairs}")
