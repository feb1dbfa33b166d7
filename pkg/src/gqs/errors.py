"""Exception hierarchy shared by the library and the command-line front end."""


class GqsError(Exception):
    """Base class for all errors raised by :mod:`gqs`."""


class InvariantError(GqsError, ValueError):
    """An object violates one of its construction invariants."""


class DimensionError(GqsError, ValueError):
    """Operands live on Hilbert spaces of different dimension."""


class PovmError(InvariantError):
    """A set of effects does not form a POVM."""


class ResolutionError(GqsError):
    """Two successive quadrature refinements disagree beyond tolerance."""


class SchemaError(GqsError):
    """An input document does not match the expected schema."""
