"""Exception types raised across the package."""


class RagcError(Exception):
    """Base class for all package errors."""


class ShapeError(RagcError, ValueError):
    pass


class DegenerateRowError(RagcError, ValueError):
    """A row whose norm is too small to be normalized."""

    def __init__(self, row: int, norm: float):
        super().__init__(f"row {row} has norm {norm:.3e}, below the normalization floor")
        self.row = row
        self.norm = norm


class ContractError(RagcError, ValueError):
    pass


class NumericalError(RagcError, ArithmeticError):
    pass


class ConfigError(RagcError, ValueError):
    pass


class DatasetError(RagcError, ValueError):
    """Malformed or missing dataset file.

    ``path`` and ``line`` (1-based, or None for file-level problems) locate the fault.
    """

    def __init__(self, message: str, path=None, line: int | None = None):
        where = ""
        if path is not None:
            where = f"{path}" + (f":{line}" if line is not None else "") + ": "
        super().__init__(where + message)
        self.path = path
        self.line = line
