"""Exception types shared across the package."""

from __future__ import annotations


class FracLdgError(Exception):
    """Base class for all package-specific errors."""


class InvalidArgumentError(FracLdgError, ValueError):
    """An argument violates a documented precondition."""


class NumericError(FracLdgError, RuntimeError):
    """A numerical procedure failed to converge or produced an unusable
    result; the message carries diagnostics (residuals, iteration counts)."""


class ConfigError(FracLdgError, ValueError):
    """An experiment configuration is malformed or inconsistent."""
