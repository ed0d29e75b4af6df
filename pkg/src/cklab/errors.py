"""Semantic exception hierarchy.

Everything raised on purpose by this package derives from :class:`CklabError`,
so callers (and the CLI) can distinguish "you asked for something invalid"
from genuine bugs.
"""


class CklabError(Exception):
    """Base class for all cklab errors."""


class ParameterError(CklabError, ValueError):
    """An argument is outside the domain an operation supports."""


class ConfigError(CklabError, ValueError):
    """An experiment config string or file failed to parse or validate."""


class QuadratureError(CklabError, ArithmeticError):
    """Gauss-Hermite node doubling did not converge to the requested tolerance."""


class HypothesisError(CklabError, ValueError):
    """Inputs violate the hypotheses under which a formula is valid."""


class NumericError(CklabError, ArithmeticError):
    """A numerical routine failed (bracketing, eigensolver, overflow)."""


class DimensionError(CklabError, ValueError):
    """Matrix dimensions outside the supported range or mutually inconsistent."""
