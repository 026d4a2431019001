"""Exception hierarchy shared by all cavitynet modules."""


class CavityNetError(Exception):
    """Base class for all errors raised by this package."""


class LatticeError(CavityNetError, ValueError):
    pass


class InvalidSizeError(LatticeError):
    pass


class InvalidEdgeError(LatticeError):
    pass


class DisconnectedGraphError(LatticeError):
    pass


class BasisMismatchError(CavityNetError, ValueError):
    pass


class LabelError(CavityNetError, IndexError):
    pass


class MatrixTooLargeError(CavityNetError):
    pass


class DegenerateDarkStateError(CavityNetError, ValueError):
    pass


class NoGapError(CavityNetError):
    pass


class ScheduleError(CavityNetError, ValueError):
    pass


class IntegrationAccuracyError(CavityNetError, ArithmeticError):
    pass


class UndefinedFidelityError(CavityNetError, ValueError):
    pass


class ConfigError(CavityNetError, ValueError):
    """Raised for malformed or inconsistent run configurations.

    ``where`` holds a dotted key path (``protocol.path``) or ``line N`` so
    the CLI can point at the offending field.
    """

    def __init__(self, message, where=None):
        self.where = where
        super().__init__(f"{where}: {message}" if where else message)
