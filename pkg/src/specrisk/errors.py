"""Exception hierarchy shared across the package."""


class SpecriskError(Exception):
    """Base class for all package-specific failures."""


class GenerationError(SpecriskError):
    """Synthetic data generation could not produce the requested sample."""


class CalibrationError(SpecriskError):
    """A calibration search failed (non-bracketing interval, no convergence)."""


class EstimationError(SpecriskError):
    """An estimator could not be evaluated on the given sample."""


class NumericalError(SpecriskError):
    """A quadrature or other numerical routine produced an unusable result."""


class SingularDensityError(SpecriskError):
    """The plug-in density estimate fell below the usable floor."""


class BootstrapError(SpecriskError):
    """Bootstrap resampling could not deliver a trustworthy interval."""


class ClaimsFormatError(SpecriskError):
    """A claims input file is malformed or empty."""
