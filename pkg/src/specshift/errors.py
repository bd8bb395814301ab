"""Exception hierarchy shared by all specshift modules."""


class SpecShiftError(Exception):
    """Base class for all library errors."""


class DimensionMismatch(SpecShiftError):
    """Two distributions or tables do not share a vocabulary size."""


class DegenerateResidual(SpecShiftError):
    """A clamp-normalized residual carries no positive mass.

    Callers are expected to take their documented fallback branch
    (sampling the compensated row directly)."""


class SupportViolation(SpecShiftError):
    """p places mass where q has none, so KL(p || q) is infinite."""


class InsufficientSamples(SpecShiftError):
    """Cell pooling cannot reach the minimum expected count for a GOF test."""


class OverflowGuard(SpecShiftError):
    """A reward/beta exponent would overflow double precision."""


class NoFeasibleVertex(SpecShiftError):
    """No vertex distribution satisfies the matched-normalizer constraint."""


class EnumerationTooLarge(SpecShiftError):
    """vocab_size ** length exceeds the exact-enumeration budget."""


class ZeroDraftMass(SpecShiftError):
    """A proposed token has zero probability under the draft model."""


class ZeroSftMass(SpecShiftError):
    """A proposed token has zero probability under the SFT draft model."""


class ConfigInvalid(SpecShiftError):
    """An experiment configuration failed validation."""
