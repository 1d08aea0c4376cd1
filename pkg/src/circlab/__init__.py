"""circlab: detection of planted phase-coherent structure in circular data.

Modules:
    specfun   -- Bessel-based special functions and calibration constants
    models    -- seeded dataset generators for the four planted models
    detectors -- interval, coherence, Rayleigh, variance, known-phase tests
    theory    -- analytic error bounds, exact second moments, regime verdicts
    lab       -- Monte Carlo harness, sweeps, phase diagrams, verify suites
"""

from . import detectors, lab, models, specfun, theory
from .errors import (CapabilityError, CirclabError, ConfigError, DomainError,
                     NumericError, ParameterError)

__version__ = "0.1.0"

__all__ = [
    "specfun", "models", "detectors", "theory", "lab",
    "CirclabError", "DomainError", "ParameterError", "NumericError",
    "CapabilityError", "ConfigError", "__version__",
]
