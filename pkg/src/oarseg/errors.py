"""Exception types shared across the package.

Grouped by how the CLI maps them to exit codes: DataError subclasses exit
with 2, usage problems with 64, anything else with 70.
"""


class OarsegError(Exception):
    """Base class for all package errors."""


class DataError(OarsegError):
    """Problems with dataset contents or user-supplied data files."""


class MissingStructure(DataError):
    def __init__(self, patient: str, organ: str):
        self.patient = patient
        self.organ = organ
        super().__init__(f"patient {patient!r}: required structure {organ!r} is missing")


class ShapeMismatch(DataError):
    def __init__(self, message: str, patient: str | None = None):
        self.patient = patient
        super().__init__(message if patient is None else f"patient {patient!r}: {message}")


class InvalidRatios(DataError):
    pass


class LabelOutOfRange(DataError):
    pass


class ClassMismatch(DataError):
    pass


class EmptyInput(DataError):
    pass


class DatasetMismatch(DataError):
    pass


class MissingCurves(DataError):
    pass


class InvalidConfig(OarsegError):
    """Config values violate an invariant or an incompatible combination."""


class ShapeError(OarsegError):
    """Tensor extents incompatible with the model (reports required divisor)."""

    def __init__(self, message: str, divisor: int | None = None):
        self.divisor = divisor
        super().__init__(message)


class DivergenceError(OarsegError):
    """Training produced non-finite losses repeatedly."""


class CorruptCheckpoint(OarsegError):
    pass


class ConfigMismatch(OarsegError):
    pass
