"""Exception hierarchy shared by the library and the command line."""


class RWQCError(Exception):
    """Base class for all errors raised by :mod:`rwqc`."""


class ValidationError(RWQCError, ValueError):
    """A parameter or input record violates a stated range invariant."""


class GammaPoleError(RWQCError, ZeroDivisionError):
    """Gamma function evaluated at a non-positive integer."""


class NumericalFault(RWQCError, ArithmeticError):
    """An internal-consistency check failed; the numbers cannot be trusted."""


class TruncationError(NumericalFault):
    """The Fock cutoff hit its hard cap before the tail bound was met."""

    def __init__(self, message, achieved_norm, cutoff):
        super().__init__(message)
        self.achieved_norm = achieved_norm
        self.cutoff = cutoff


class OutOfRegimeError(RWQCError, ValueError):
    """An approximate formula was applied outside the region where it is real."""

    def __init__(self, message, radicand):
        super().__init__(message)
        self.radicand = radicand


class DegenerateFitError(ValidationError):
    """The observation set cannot constrain the requested parameters."""
