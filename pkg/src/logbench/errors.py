"""Shared exception types."""


class LogbenchError(Exception):
    """Base class for all toolkit errors."""


class CatalogError(LogbenchError):
    """Template catalog file is malformed or inconsistent."""


class ProfileError(LogbenchError):
    """Dataset profile is malformed or incomplete."""


class ValidationError(LogbenchError):
    """An argument, configuration value, or input violates its contract."""


class DetectorNotApplicable(LogbenchError):
    """The detector cannot run on this data set (e.g. timing without timestamps)."""


class EvalDataError(LogbenchError):
    """The data set cannot support the requested evaluation."""
