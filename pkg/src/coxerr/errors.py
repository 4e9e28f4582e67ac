"""Exception taxonomy shared across the package."""


class CoxerrError(Exception):
    """Base class for all package-specific failures."""


class OutOfDomain(CoxerrError):
    """Evaluation point outside [0, tau]."""


class NonConvergence(CoxerrError):
    """An iterative routine hit its iteration cap with too large a residual."""


class InvalidModel(CoxerrError):
    """A true-model specification violates its constraints (e.g. zero hazard node)."""


class NoEvents(CoxerrError):
    """Dataset contains no uncensored records; the hazard is unidentified."""


class SeriesOverflow(CoxerrError):
    """Moment quantities would exceed the float64 exponent range."""


class TruncationFailure(CoxerrError):
    """Series truncation cap reached while the tail bound is still too large."""


class DegenerateB(CoxerrError):
    """Estimated b(t) fell below the positivity threshold at a required point."""


class SingularSandwich(CoxerrError):
    """Sandwich covariance (or M-hat) is numerically singular."""


class SingularKernel(CoxerrError):
    """The degenerate-kernel linear system is numerically singular."""


class ResidualFailure(CoxerrError):
    """A solved integral equation failed its residual verification."""


class ZeroVariance(CoxerrError):
    """Estimated asymptotic variance is numerically zero."""


class ConfigError(CoxerrError):
    """Configuration file could not be parsed or validated."""

    def __init__(self, message, line=None, key=None):
        self.line = line
        self.key = key
        prefix = ""
        if line is not None:
            prefix += f"line {line}: "
        if key is not None:
            prefix += f"key '{key}': "
        super().__init__(prefix + message)
