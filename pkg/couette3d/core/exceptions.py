"""Custom exception classes for the application."""


class AppException(Exception):
    """Base exception class for application errors.

    ``exit_code`` is the process status used by the CLI; ``status_code`` is the
    HTTP status used by the API.
    """

    exit_code = 2
    status_code = 400

    def __init__(self, message: str, code: str = "APP_ERROR"):
        self.message = message
        self.code = code
        super().__init__(self.message)


class ConfigurationError(AppException):
    """Raised when an experiment or parameter set fails validation."""

    def __init__(self, message: str = "Invalid configuration"):
        super().__init__(message, code="CONFIG_ERROR")


class GridMismatchError(AppException):
    """Raised when array shapes do not match the grid they are used with."""

    def __init__(self, expected: tuple, actual: tuple):
        self.expected = tuple(expected)
        self.actual = tuple(actual)
        super().__init__(
            f"Dimension mismatch: expected {self.expected}, got {self.actual}",
            code="DIMENSION_MISMATCH"
        )


class DivergenceError(AppException):
    """Raised when a field that must be divergence-free is not."""

    def __init__(self, residual: float):
        self.residual = residual
        super().__init__(
            f"Field is not divergence-free (relative residual {residual:.3e})",
            code="NOT_DIVERGENCE_FREE"
        )


class ZeroWavevectorError(AppException):
    """Raised when an inverse Laplacian is requested at the zero wavevector."""

    def __init__(self, k: int, eta_t: float, l: int):
        super().__init__(
            f"Zero shear wavevector ({k}, {eta_t}, {l}) has no inverse Laplacian",
            code="ZERO_WAVEVECTOR"
        )


class ParameterRangeError(AppException):
    """Raised when a scalar argument lies outside its admissible range."""

    def __init__(self, message: str):
        super().__init__(message, code="PARAMETER_RANGE")


class SamplingCadenceError(AppException):
    """Raised when a sampled history is not on a uniform time grid."""

    def __init__(self, message: str = "Samples are not uniformly spaced"):
        super().__init__(message, code="SAMPLING_CADENCE")


class RemapError(AppException):
    """Raised when a shear remap is requested at a non-commensurate time."""

    def __init__(self, t: float, shift: float):
        super().__init__(
            f"Cannot remap at t={t}: lattice shift {shift} is not an integer",
            code="NON_COMMENSURATE_TIME"
        )


class NumericalFailure(AppException):
    """Base class for failures detected while integrating."""

    exit_code = 3
    status_code = 422


class CFLViolationError(NumericalFailure):
    """Raised when a step would exceed the Courant limit."""

    def __init__(self, courant: float, limit: float, t: float):
        self.courant = courant
        self.t = t
        super().__init__(
            f"CFL violation at t={t:.6g}: Courant number {courant:.4g} > {limit}",
            code="CFL_VIOLATION"
        )


class NumericalInstabilityError(NumericalFailure):
    """Raised when a state contains non-finite values."""

    def __init__(self, t: float, detail: str = "non-finite values in state"):
        self.t = t
        super().__init__(f"Numerical failure at t={t:.6g}: {detail}", code="NUMERICAL_FAILURE")


class JacobianError(NumericalFailure):
    """Raised when the coordinate transform leaves its invertibility regime."""

    def __init__(self, t: float, sup_dyc: float):
        self.t = t
        self.sup_dyc = sup_dyc
        super().__init__(
            f"Jacobian precondition failed at t={t:.6g}: sup|dY C| = {sup_dyc:.4g} >= 1/2",
            code="JACOBIAN_PRECONDITION"
        )


class CheckpointCorruptError(NumericalFailure):
    """Raised when a checkpoint file is truncated or malformed."""

    def __init__(self, path: str, detail: str):
        super().__init__(f"Corrupt checkpoint '{path}': {detail}", code="CHECKPOINT_CORRUPT")


class CheckpointVersionError(NumericalFailure):
    """Raised when a checkpoint carries an unknown magic/version tag."""

    def __init__(self, path: str, magic: bytes):
        super().__init__(
            f"Unsupported checkpoint version in '{path}': {magic!r}",
            code="CHECKPOINT_VERSION"
        )


class ArtifactNotFoundError(AppException):
    """Raised when a requested run artifact is not found."""

    status_code = 404

    def __init__(self, filename: str):
        super().__init__(
            f"Artifact '{filename}' not found",
            code="ARTIFACT_NOT_FOUND"
        )
