class ParameterError(ValueError):
    """An argument is outside its documented domain."""


class CapacityError(ParameterError):
    """A problem is too large for exact enumeration or dense simulation."""


class TrainingDivergedError(RuntimeError):
    pass


class DatasetError(Exception):
    """Base class for corpus and checkpoint loading failures."""


class ParseError(DatasetError):
    pass


class VersionError(DatasetError):
    pass


class InvariantError(DatasetError):
    pass


class PersistenceError(DatasetError):
    """Writing failed; ``last_index`` is the last durably written record (-1 if none)."""

    def __init__(self, message: str, last_index: int = -1):
        super().__init__(message)
        self.last_index = last_index
