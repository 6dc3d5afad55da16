"""Exception hierarchy shared across the package."""


class FastReadoutError(Exception):
    """Base class for all package errors."""


class ConfigError(FastReadoutError):
    """Invalid or inconsistent configuration input."""


class DispersiveRegimeError(FastReadoutError):
    """Parameters straddle a resonance or violate the dispersive guard."""


class GridError(FastReadoutError):
    """Time grid too coarse or incompatible with the requested operation."""


class PhotonCeilingError(FastReadoutError):
    """Intracavity photon number exceeded the configured ceiling."""


class TauRangeError(FastReadoutError):
    """Requested integration time lies outside the trace support."""


class NoSignalError(FastReadoutError):
    """Ground and excited responses are identical; no weights can be built."""


class FitError(FastReadoutError):
    """A nonlinear fit failed to converge or the data are degenerate."""
