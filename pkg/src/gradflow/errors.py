"""Exception hierarchy shared across the package.

Every error raised deliberately by gradflow derives from :class:`GradflowError`,
so callers (and the CLI) can separate anticipated failures from genuine bugs.
"""

from __future__ import annotations


class GradflowError(Exception):
    """Base class for all anticipated gradflow failures."""


class ConfigError(GradflowError):
    """A configuration file or override is malformed or inconsistent."""


class DomainError(GradflowError):
    """An input lies outside the mathematical domain of an operation."""


class DimensionMismatch(GradflowError):
    """Array shapes are inconsistent with the declared architecture or data."""


class UnsupportedOrder(GradflowError):
    """A Taylor jet was requested above the smoothness order of the function."""


class NoNonzeroCoefficient(GradflowError):
    """No grid point produced a usable nonzero Taylor coefficient."""


class IllConditioned(GradflowError):
    """A linear solve produced a residual above the accepted tolerance."""


class DegenerateScale(GradflowError):
    """The network-builder scale parameter must be a positive number."""


class ArchitectureTooSmall(GradflowError):
    """A deep architecture violates a width condition needed for embedding."""


class StepSizeUnderflow(GradflowError):
    """An adaptive integrator could not make progress above its minimum step."""


class NonFiniteState(GradflowError):
    """An integrator state became NaN or infinite."""


class NonFiniteGradient(GradflowError):
    """An optimizer received a NaN or infinite gradient."""


class ZeroMass(GradflowError):
    """A quadrature weight vector summed to zero and cannot be normalized."""


class AllZeroReference(GradflowError):
    """A relative error was requested against an identically-zero reference."""


class BadMagic(GradflowError):
    """A binary tensor file does not start with the expected magic bytes."""


class TruncatedPayload(GradflowError):
    """A binary tensor file ends before its declared payload is complete."""


class UnsupportedType(GradflowError):
    """A binary tensor file declares an element type this parser does not read."""


class SchemaMismatch(GradflowError):
    """Recorded metrics do not match the schema the plotter expects."""
