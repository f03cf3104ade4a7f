"""Error taxonomy shared by all modules.

Every failure mode is a distinct class so callers (and the CLI) can
attribute a failure to the operation contract that was violated.
"""


class ParahermError(Exception):
    """Base class for all library errors."""


class ExprSyntaxError(ParahermError):
    """Malformed expression source; carries the byte offset of the failure."""

    def __init__(self, message, offset):
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


class UnknownIdentifier(ParahermError):
    def __init__(self, name, offset):
        super().__init__(f"unknown identifier {name!r} (at offset {offset})")
        self.name = name
        self.offset = offset


class NonIntegerExponent(ParahermError):
    def __init__(self, offset):
        super().__init__(f"exponent must be an integer literal (at offset {offset})")
        self.offset = offset


class DimensionMismatch(ParahermError):
    pass


class DivisionByZero(ParahermError, ZeroDivisionError):
    pass


class DomainError(ParahermError):
    pass


class RankMismatch(ParahermError):
    pass


class InsufficientJetOrder(ParahermError):
    pass


class SingularMetric(ParahermError):
    pass


class NotAntisymmetric(ParahermError):
    pass


class NotTorsionless(ParahermError):
    pass


class NotIntegrable(ParahermError):
    pass


class NotParaKahler(ParahermError):
    pass


class WrongType(ParahermError):
    """A form has components outside its declared plus/minus type."""


class MissingSplit(ParahermError):
    pass


class SingularFrame(ParahermError):
    pass


class Unsupported(ParahermError):
    pass


class NotPositiveDefinite(ParahermError):
    pass


class SpecParseError(ParahermError):
    """Run-spec file could not be parsed; carries a human-readable location."""

    def __init__(self, message, location=""):
        loc = f" [{location}]" if location else ""
        super().__init__(f"{message}{loc}")
        self.location = location
