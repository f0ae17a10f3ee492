"""Exception hierarchy.

Every error carries an ``exit_code`` used by the command line front end, so
each failure class maps to its own process status.
"""


class MwaveError(Exception):
    exit_code = 1


class ParseError(MwaveError):
    exit_code = 3

    def __init__(self, line, reason):
        self.line = line
        self.reason = reason
        super().__init__(f"line {line}: {reason}")


class UnknownKey(MwaveError):
    exit_code = 4

    def __init__(self, section, key):
        self.section = section
        self.key = key
        super().__init__(f"unknown key '{key}' in section [{section}]")


class InvariantViolation(MwaveError, ValueError):
    exit_code = 5


class UnknownTissue(MwaveError, KeyError):
    exit_code = 6

    def __str__(self):
        return str(self.args[0]) if self.args else "unknown tissue"


class GeometryError(MwaveError, ValueError):
    exit_code = 7


class NonPhysical(MwaveError, ValueError):
    exit_code = 8


class Diverged(MwaveError, RuntimeError):
    exit_code = 9


class MismatchedAcquisition(MwaveError, ValueError):
    exit_code = 10


class OutOfRecord(MwaveError, ValueError):
    exit_code = 11


class FlatImage(MwaveError, ValueError):
    exit_code = 12


class TotalReflection(MwaveError, ValueError):
    """S11 of 0 dB: every watt comes back, the standing-wave ratio is infinite."""

    exit_code = 13
    vswr = float("inf")


EXIT_CODES = {
    cls.__name__: cls.exit_code
    for cls in (
        MwaveError,
        ParseError,
        UnknownKey,
        InvariantViolation,
        UnknownTissue,
        GeometryError,
        NonPhysical,
        Diverged,
        MismatchedAcquisition,
        OutOfRecord,
        FlatImage,
        TotalReflection,
    )
}
