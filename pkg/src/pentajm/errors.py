"""Exception types shared across the engine.

Everything raised on purpose derives from EngineError so callers can
distinguish engine failures from programming errors.
"""

from __future__ import annotations


class EngineError(Exception):
    """Base class for all engine-level failures."""


class RegimeError(EngineError):
    """Parameters fall outside the supercritical regime the engine covers."""


class NonConvergenceError(EngineError):
    """An iteration or series exhausted its accuracy budget."""


class SingularMatrixError(EngineError):
    """A factorization hit an (numerically) exactly singular pivot."""


class DegenerateSpectrumError(EngineError):
    """An eigenvalue gap is too small for a spectral formula to be trusted."""


class PoleError(EngineError):
    """Requested energy sits on (or hugs) an eigenvalue of the inner problem."""


class ZeroCoefficientError(EngineError):
    """A kinematic denominator coefficient vanished; ratios are undefined."""


class ConfigError(EngineError):
    """Malformed or inconsistent run configuration."""


class PrecisionLossWarning(UserWarning):
    """A computation finished but its residual monitor saw degraded accuracy."""
