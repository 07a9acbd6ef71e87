"""
Semantic errors shared by every thin-set module.

Library code raises these; the CLI maps them to exit codes via each class's exit_code.
Public functions do not raise bare ValueError.
"""

# CLI exit codes
EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_ASSERTION = 3
EXIT_IO = 4


class ThinSetsError(Exception):
    """Base error for this package."""

    exit_code = EXIT_ASSERTION


class ConfigError(ThinSetsError, ValueError):
    """Config document or CLI arguments violate the contract."""

    exit_code = EXIT_CONFIG


class InvalidParameter(ThinSetsError, ValueError):
    """A numeric parameter is outside its documented range."""

    exit_code = EXIT_CONFIG


# --- regvar ---

class InadmissibleExponent(InvalidParameter):
    """Exponent c outside [1, 2) or not allowed for the family."""


class InadmissibleSlowlyVarying(InvalidParameter):
    """The slowly varying factor fails the L / L0 grid conditions."""


class DomainTooSmall(InvalidParameter):
    """Domain start x0 below the family minimum or h(x0) < 1."""


class NoConvergence(ThinSetsError, ArithmeticError):
    """Inversion iteration budget exhausted."""


# --- thinset ---

class PrecisionExhausted(ThinSetsError, ArithmeticError):
    """High-precision membership pass still inside the boundary guard."""

    def __init__(self, n: int, margin: float):
        super().__init__(f"membership undecidable at n={n} (high-precision margin {margin:.3e})")
        self.n = n
        self.margin = margin


class OutOfHorizon(ThinSetsError, IndexError):
    """Requested scale or point lies beyond the enumerated horizon."""


class EmptySet(ThinSetsError):
    """An average was requested over an empty set of elements."""


# --- expsum ---

class InsufficientGrid(ThinSetsError):
    """A fit was requested on fewer grid points than required."""


# --- operators ---

class EmptyPlan(ThinSetsError):
    """A scale plan materialised no scales within the horizon."""


class EmptyInput(ThinSetsError):
    """An operation that needs at least one signal got none."""


class BadCutPoints(ThinSetsError, ValueError):
    """Oscillation cut points are not strictly increasing or leave the horizon."""

    exit_code = EXIT_CONFIG


class NonMonotonePsi(ThinSetsError):
    """psi increases somewhere on the range used by the lambda weights."""


class IdentityViolation(ThinSetsError, AssertionError):
    """Two routes to the same quantity disagree beyond tolerance."""


# --- czd ---

class AlphaTooSmall(ThinSetsError):
    """No admissible root cube within the 2^62 span."""


# --- ergodic ---

class DimensionTooLarge(ThinSetsError):
    """Multi-parameter averages are limited to k <= 3."""
