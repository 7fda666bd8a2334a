"""
Exception hierarchy for the ForgeFighter system.
"""


class ForgeFighterError(Exception):
    """Base class for all ForgeFighter errors."""


class ImageFormatError(ForgeFighterError, ValueError):
    """Unsupported file format or raster violating the Image invariants."""


class PreconditionError(ForgeFighterError, ValueError):
    """An operation was called with inputs outside its contract."""


class ManifestError(ForgeFighterError, ValueError):
    """Invalid dataset manifest or missing per-entry artifacts."""


class UndefinedMetricError(ForgeFighterError, ValueError):
    """A metric is undefined for the given records (e.g. a single class)."""


class MissingCacheError(ForgeFighterError, RuntimeError):
    """Backward was requested without a matching forward cache."""
