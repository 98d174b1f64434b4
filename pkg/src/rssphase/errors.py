"""Exception types raised by the library."""


class RSSError(Exception):
    """Base class for all errors raised by rssphase."""


class SizeError(RSSError, ValueError):
    """Grid too small to host an operator's boundary closure."""


class DimensionError(RSSError, ValueError):
    """Operator and field live on incompatible grids."""


class ParameterError(RSSError, ValueError):
    """A numerical parameter is out of its admissible range."""


class DiagnosticSizeError(RSSError, ValueError):
    """Dense diagnostic requested on a grid that is too large."""


class DegeneratePhaseError(RSSError, ValueError):
    """Segmentation region average is undefined (one phase is empty)."""


class ConvergenceError(RSSError, RuntimeError):
    """An inner iteration hit its cap without meeting the tolerance.

    ``residual`` is the last increment norm and ``iterate`` the last
    iterate, so callers can inspect or reuse the partial result.
    """

    def __init__(self, message, residual=float("nan"), iterate=None, iterations=0):
        super().__init__(message)
        self.residual = residual
        self.iterate = iterate
        self.iterations = iterations


class NonFiniteError(RSSError, RuntimeError):
    """A time step produced NaN or Inf values."""


class ConfigError(RSSError, ValueError):
    """Invalid experiment configuration; ``line`` is 1-based when known."""

    def __init__(self, message, line=None):
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)
        self.line = line


class ImageFormatError(RSSError, ValueError):
    """Malformed or truncated PGM file."""
