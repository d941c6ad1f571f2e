"""Exception hierarchy shared by the numerics, the models and the CLI.

Every error carries an `exit_code` so `main` can map failures to the
documented process exit status without a lookup table of its own.
"""


class MemnoError(Exception):
    """Base class for all memno-lab failures."""

    exit_code = 2


# ------------------------------ configuration ------------------------------


class ConfigError(MemnoError):
    """Invalid configuration, flag combination or grid."""

    exit_code = 1


class ResolutionMismatchError(ConfigError):
    """A dataset's spatial resolution differs from the model binding."""

    def __init__(self, dataset_resolution: int, model_resolution: int):
        super().__init__(
            f"dataset resolution {dataset_resolution} does not match model resolution {model_resolution}"
        )
        self.dataset_resolution = dataset_resolution
        self.model_resolution = model_resolution


# ------------------------------ numerics ------------------------------


class ShapeError(MemnoError):
    """Operands with incompatible shapes."""

    def __init__(self, message: str, *shapes):
        if shapes:
            message = f"{message}: " + " vs ".join(str(tuple(s)) for s in shapes)
        super().__init__(message)
        self.shapes = tuple(tuple(s) for s in shapes)


class EmptyAxisError(ShapeError):
    """Transform requested over a zero-length axis."""


class NonScalarRootError(MemnoError):
    """backward() called on a tensor with more than one element."""


class NonFiniteError(MemnoError):
    """A NaN or Inf showed up where finite values are required."""

    def __init__(self, message: str, index=None):
        if index is not None:
            message = f"{message} (at index {index})"
        super().__init__(message)
        self.index = index


class ZeroEnergyError(MemnoError):
    """A ratio normalised by field energy was asked of a zero field."""


class SolverDivergenceError(MemnoError):
    """A PDE solver produced a non-finite state."""

    def __init__(self, kind: str, time: float):
        super().__init__(f"{kind} solver diverged at t={time:.6g}")
        self.kind = kind
        self.time = time


class IllPosedEvolutionError(MemnoError):
    """The truncated Mori-Zwanzig propagator overflowed."""


class UnstableKernelError(MemnoError):
    """Discretised state matrix has an eigenvalue on or outside the unit circle."""


class TrainingDivergenceError(MemnoError):
    """The training loss became non-finite."""

    def __init__(self, epoch: int, batch: int, loss: float):
        super().__init__(f"non-finite loss {loss} at epoch {epoch}, batch {batch}")
        self.epoch = epoch
        self.batch = batch


# ------------------------------ persistence ------------------------------


class ContainerError(MemnoError):
    """Base class for dataset container failures."""

    exit_code = 3


class BadMagicError(ContainerError):
    pass


class UnsupportedVersionError(ContainerError):
    pass


class TruncatedContainerError(ContainerError):
    def __init__(self, path, expected: int, actual: int):
        super().__init__(f"{path}: truncated container, expected {expected} bytes, got {actual}")
        self.expected = expected
        self.actual = actual


class NonFinitePayloadError(ContainerError):
    pass


class ContainerIOError(ContainerError):
    def __init__(self, path, cause: Exception):
        super().__init__(f"{path}: {cause}")
        self.path = str(path)
