"""Exception types shared across the package."""

from __future__ import annotations


class PixelwattError(Exception):
    """Base class for all domain errors raised by this package."""


class ConfigError(PixelwattError):
    """A configuration value is structurally invalid for the requested operation."""


class FitError(PixelwattError):
    """A least-squares or model fit could not produce a usable result."""


class CalibrationError(PixelwattError):
    """A lambda-range calibration target is unreachable or ambiguous."""


class DataError(PixelwattError):
    """Input data is malformed, inconsistent, or refers to unknown records."""
