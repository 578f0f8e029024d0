"""Exception hierarchy with stable, machine-readable error codes.

Every error raised by the library carries a ``code`` string of the form
``"<area>.<reason>"`` (e.g. ``"config.t_required"``, ``"solver.degenerate_weights"``).
The CLI serializes these into its error JSON, so codes are part of the public
interface and must stay stable.
"""

from __future__ import annotations


class EecopError(Exception):
    """Base class for all library errors."""

    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code
        self.message = message


class ConfigError(EecopError):
    """Invalid or inconsistent run configuration (CLI exit code 2)."""


class DataError(EecopError):
    """Malformed or unusable input data."""


class FitError(EecopError):
    """A model fit failed (degenerate margin, singular copula, ...)."""


class SolverError(EecopError):
    """An estimating-equation solve failed (numeric failure, exit code 3)."""
