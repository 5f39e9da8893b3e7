"""Exception hierarchy shared by all biflow modules."""


class BiflowError(Exception):
    """Base class for every error raised by the package."""


class ConfigurationError(BiflowError):
    pass


class ShapeError(BiflowError):
    pass


class StencilError(BiflowError):
    pass


class ConstraintViolation(BiflowError):
    """A field flagged sphere-valued has a node off the unit sphere."""


class BoundaryDataError(BiflowError):
    pass


class SnapshotFormatError(BiflowError):
    def __init__(self, message, offset):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class PreconditionError(BiflowError):
    pass


class SmallnessError(PreconditionError):
    """Energy smallness hypothesis violated; carries the measured energies."""

    def __init__(self, message, measured):
        super().__init__(f"{message}: {measured}")
        self.measured = dict(measured)


class DomainRangeError(BiflowError):
    pass


class SingularityError(BiflowError):
    pass


class StagnationError(BiflowError):
    """The line search rejected too many step sizes in a row."""

    def __init__(self, message, state=None, trajectory=None):
        super().__init__(message)
        self.state = state
        self.trajectory = trajectory


class ConfigParseError(BiflowError):
    def __init__(self, message, line=None):
        where = f"line {line}: " if line is not None else ""
        super().__init__(where + message)
        self.line = line
