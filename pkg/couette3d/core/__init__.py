from .logging import setup_logging, get_logger
from .config import Settings, get_settings
from .exceptions import (
    AppException,
    ConfigurationError,
    GridMismatchError,
    DivergenceError,
    ZeroWavevectorError,
    ParameterRangeError,
    SamplingCadenceError,
    RemapError,
    NumericalFailure,
    CFLViolationError,
    NumericalInstabilityError,
    JacobianError,
    CheckpointCorruptError,
    CheckpointVersionError,
    ArtifactNotFoundError,
)

__all__ = [
    "setup_logging",
    "get_logger",
    "Settings",
    "get_settings",
    "AppException",
    "ConfigurationError",
    "GridMismatchError",
    "DivergenceError",
    "ZeroWavevectorError",
    "ParameterRangeError",
    "SamplingCadenceError",
    "RemapError",
    "NumericalFailure",
    "CFLViolationError",
    "NumericalInstabilityError",
    "JacobianError",
    "CheckpointCorruptError",
    "CheckpointVersionError",
    "ArtifactNotFoundError",
]
