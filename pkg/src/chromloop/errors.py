"""Exception types shared across the package."""


class ChromloopError(Exception):
    """Base class for all package-specific errors."""


class UnsupportedOrder(ChromloopError):
    """Requested conference-matrix order is not in the embedded catalogue."""


class UnsupportedFactorCount(ChromloopError):
    """Factor count outside the supported range for the requested design."""


class AlreadyAllocated(ChromloopError):
    """Design table already carries batch assignments."""


class ZeroSolids(ChromloopError):
    """Total-solid mass is zero; purity undefined."""


class MassExceedsSolids(ChromloopError):
    """Target mass larger than total solids."""


class ZeroTime(ChromloopError):
    """Process time is zero; productivity undefined."""


class RankDeficient(ChromloopError):
    """Design matrix lost full column rank."""


class InsufficientData(ChromloopError):
    """Not enough rows for the requested fit."""


class NoFeasibleSolution(ChromloopError):
    """Optimizer finished without any feasible solution.

    Carries the front of least-violating points in ``self.front``.
    """

    def __init__(self, message, front=None):
        super().__init__(message)
        self.front = front


class UnknownBatch(ChromloopError):
    """Batch id not present in the plant's batch table."""


class PlantBusy(ChromloopError):
    """Plant is running and queueing is disabled."""


class WrongPhase(ChromloopError):
    """Operation not allowed in the current plant phase."""


class DuplicateId(ChromloopError):
    """Record id already present in the store."""


class StorageFailure(ChromloopError):
    """Record could not be written or read back."""


class ConfigError(ChromloopError):
    """Invalid or unsupported configuration document."""
