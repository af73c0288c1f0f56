"""Exception hierarchy.

Every error carries an ``exit_code`` so the CLI can map failures to distinct
process exit statuses by family:

    3  dataset / input data problems
    4  file I/O (read or write)
    5  configuration
    6  numerical failure (non-finite values, divergence)
    7  incompatible checkpoint / archive pairing
"""


class GrcNetError(Exception):
    exit_code = 1


# dataset family --------------------------------------------------------------


class DatasetError(GrcNetError):
    exit_code = 3


class MissingFile(DatasetError, FileNotFoundError):
    def __init__(self, path):
        self.path = str(path)
        super().__init__(f"no such file: {self.path}")


class ParseError(DatasetError, ValueError):
    def __init__(self, path, line: int, text: str = ""):
        self.path = str(path)
        self.line = line
        super().__init__(f"{self.path}:{line}: not a number: {text!r}")


class EmptyFile(DatasetError, ValueError):
    def __init__(self, path):
        self.path = str(path)
        super().__init__(f"{self.path}: no samples")


class WindowTooLong(DatasetError, ValueError):
    pass


class EmptyClass(DatasetError, ValueError):
    def __init__(self, label):
        self.label = label
        super().__init__(f"class {label} has no records")


class DegenerateRange(DatasetError, ValueError):
    """Window has max == min, so min-max scaling is undefined."""


class DomainError(DatasetError, ValueError):
    pass


class IndivisibleLength(DatasetError, ValueError):
    pass


# nn / numerics ---------------------------------------------------------------


class ShapeMismatch(GrcNetError, ValueError):
    exit_code = 5


class NonFinite(GrcNetError, FloatingPointError):
    exit_code = 6


class DivergenceDetected(NonFinite):
    def __init__(self, message: str, history=None):
        super().__init__(message)
        self.history = history


class EmptyConfusion(GrcNetError, ValueError):
    exit_code = 3


# io / config -----------------------------------------------------------------


class ReadError(GrcNetError, OSError):
    exit_code = 4

    def __init__(self, path, reason: str = "cannot read"):
        self.path = str(path)
        super().__init__(f"{reason}: {self.path}")


class WriteError(GrcNetError, OSError):
    exit_code = 4

    def __init__(self, path, reason: str = "cannot write"):
        self.path = str(path)
        super().__init__(f"{reason}: {self.path}")


class ConfigError(GrcNetError, ValueError):
    exit_code = 5


class IncompatibleCheckpoint(GrcNetError, ValueError):
    exit_code = 7
