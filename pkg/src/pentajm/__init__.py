"""Penta-diagonal J-matrix scattering engine.

Short-range potentials on top of a supercritical inverse-square core:
reference-solution expansions in Laguerre / oscillator bases, finite
Green's functions in non-orthogonal bases, S-matrices and phase shifts.
"""

from .errors import (
    ConfigError,
    DegenerateSpectrumError,
    EngineError,
    NonConvergenceError,
    PoleError,
    PrecisionLossWarning,
    RegimeError,
    SingularMatrixError,
    ZeroCoefficientError,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DegenerateSpectrumError",
    "EngineError",
    "NonConvergenceError",
    "PoleError",
    "PrecisionLossWarning",
    "RegimeError",
    "SingularMatrixError",
    "ZeroCoefficientError",
    "__version__",
]
