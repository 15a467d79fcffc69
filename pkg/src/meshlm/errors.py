"""Exception taxonomy shared by all meshlm modules."""


class MeshlmError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(MeshlmError):
    """Operand shapes are incompatible with the requested operation."""


class ConfigError(MeshlmError):
    """A configuration value is invalid or inconsistent."""


class DataError(MeshlmError):
    """Input data violates a precondition (bad token id, both-zero inputs...)."""


class NumericalError(MeshlmError):
    """A NaN/Inf appeared where the contract requires finite values."""


class StateError(MeshlmError):
    """An operation was called on an incomplete or inconsistent record."""


class DegenerateInputError(MeshlmError):
    """Input is degenerate for the metric (zero matrix, identical rows...)."""


class ParseError(MeshlmError):
    """Malformed layer-plan or config text.

    Carries the byte offset of the first offending character.
    """

    def __init__(self, message, offset):
        super().__init__(f"{message} (offset {offset})")
        self.offset = offset


class RangeError(MeshlmError):
    """A parsed value is syntactically fine but out of the legal range."""
