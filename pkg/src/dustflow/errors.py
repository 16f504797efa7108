"""Exception types shared across the package."""


class DustflowError(Exception):
    """Base class for all package-specific errors."""


class EmptyMeasure(DustflowError):
    """The measure specification carries no mass."""


class DegenerateTotalMerge(DustflowError):
    """An atom at r = 1 would merge everything in one event."""


class NoDust(DustflowError):
    """The dust integral diverges; the flow engine cannot run this measure."""


class OutOfRange(DustflowError, ValueError):
    """A parameter lies outside its admissible range."""


class DivergentIntegral(DustflowError):
    """A requested functional of the measure is infinite."""


class CapExceeded(DustflowError):
    """The cutoff index was not reached within the scanned range."""


class BudgetUnreachable(DustflowError):
    """No tabulated truncation level satisfies the mass budget."""


class ZeroActivity(DustflowError):
    """No jumps occur above the chosen truncation level."""


class TimeRegression(DustflowError):
    """A jump was applied at a time before the current system time."""


class ShapeMismatch(DustflowError, ValueError):
    """Masses and participation flags disagree in length."""


class ConditionUnmet(DustflowError):
    """An integrability condition required by this check does not hold."""


class InsufficientSignal(DustflowError):
    """Too few grid points survive the relative-error filter for a fit."""


class MaxJumpsExceeded(DustflowError):
    """A trajectory exceeded the configured jump cap."""


class Absorbed(DustflowError):
    """The finite chain has a single block; no further transitions exist."""
