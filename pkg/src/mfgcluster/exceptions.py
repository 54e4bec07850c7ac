from typing import Optional


class MeasureError(ValueError):
    """Parent exception for all errors related to empirical measures"""


class LengthMismatchError(MeasureError):
    """Raised when positions and weights have different lengths"""

    def __init__(self, n_positions: int, n_weights: int) -> None:
        self.n_positions = n_positions
        self.n_weights = n_weights

    def __str__(self) -> str:
        return f"Got {self.n_positions} positions but {self.n_weights} weights"


class NegativeWeightError(MeasureError):
    """Raised when an atom carries a negative mass"""

    def __init__(self, index: int, weight: float) -> None:
        self.index = index
        self.weight = weight

    def __str__(self) -> str:
        return f"Negative weight {self.weight!r} at atom {self.index}"


class WeightSumOutOfToleranceError(MeasureError):
    """Raised when the weights are too far from a probability vector to be
    silently renormalized"""

    def __init__(self, total: float, tolerance: float) -> None:
        self.total = total
        self.tolerance = tolerance

    def __str__(self) -> str:
        return f"Weights sum to {self.total!r}, more than {self.tolerance} away from 1"


class EmptyGridError(MeasureError):
    """Raised when a grid or measure with no points is requested"""

    def __str__(self) -> str:
        return "A grid needs at least one point"


class EmptyMeasureError(MeasureError):
    """Raised when a measure would end up without any atom carrying mass"""

    def __str__(self) -> str:
        return "A measure needs at least one atom with positive weight"


class InvalidIntervalError(MeasureError):
    """Raised when an interval [a, b] does not satisfy a < b"""

    def __init__(self, a: float, b: float) -> None:
        self.a = a
        self.b = b

    def __str__(self) -> str:
        return f"Invalid interval [{self.a}, {self.b}]"


class CouplingError(ValueError):
    """Parent exception for all errors related to interaction kernels"""


class InvalidCouplingError(CouplingError):
    """Raised when a kernel violates one of the invariants the theory needs"""

    def __init__(self, name: str, reason: str) -> None:
        self.name = name
        self.reason = reason

    def __str__(self) -> str:
        return f"Invalid coupling '{self.name}': {self.reason}"


class UnknownCouplingError(LookupError):
    """Raised when a coupling name is not in the registry"""

    def __init__(self, name: str) -> None:
        self.name = name

    def __str__(self) -> str:
        return f"No coupling registered as '{self.name}'"


class SolverError(RuntimeError):
    """Parent exception for all errors raised by the numerical solvers"""


class NonConvergenceError(SolverError):
    """Raised when Newton or Picard iterations exhaust their budget"""

    def __init__(
        self,
        stage: str,
        iterations: int,
        index: Optional[int] = None,
        round: Optional[int] = None,
    ) -> None:
        self.stage = stage
        self.iterations = iterations
        self.index = index
        self.round = round

    def __str__(self) -> str:
        where = ""
        if self.round is not None:
            where += f" in round {self.round}"
        if self.index is not None:
            where += f" for agent {self.index}"
        return f"{self.stage} did not converge after {self.iterations} iterations{where}"


class InvalidGameConfigError(SolverError, ValueError):
    """Raised when a game configuration is not admissible for its coupling"""

    def __init__(self, reason: str) -> None:
        self.reason = reason

    def __str__(self) -> str:
        return f"Invalid game configuration: {self.reason}"


class DynamicsError(Exception):
    """Parent exception for all errors related to the iterated game"""


class BlocksNotSeparatedError(DynamicsError):
    """Raised when a requested block split has two neighbouring blocks
    closer than the support radius"""

    def __init__(self, boundary: int, gap: float, radius: float) -> None:
        self.boundary = boundary
        self.gap = gap
        self.radius = radius

    def __str__(self) -> str:
        return (
            f"Blocks split at index {self.boundary} are only {self.gap!r} apart"
            f" (needs > {self.radius})"
        )


class StabilityError(Exception):
    """Parent exception for all errors raised by the spectral analysis"""


class NotSymmetricError(StabilityError):
    """Raised when a symmetric eigensolve is requested for a non-symmetric matrix"""

    def __init__(self, asymmetry: float) -> None:
        self.asymmetry = asymmetry

    def __str__(self) -> str:
        return f"Matrix is not symmetric (max |M - M^T| = {self.asymmetry!r})"


class SingularMatrixError(StabilityError):
    """Raised when the linearized equilibrium system cannot be inverted"""

    def __init__(self, horizon: float) -> None:
        self.horizon = horizon

    def __str__(self) -> str:
        return f"Matrix A is singular for t = {self.horizon!r}"


class NotAFixedPointError(StabilityError):
    """Raised when a configuration handed to the stability analysis is not
    a fixed point of the equilibrium map"""

    def __init__(self, residual: float, tolerance: float) -> None:
        self.residual = residual
        self.tolerance = tolerance

    def __str__(self) -> str:
        return f"Not a fixed point within {self.tolerance!r} (gradient residual {self.residual!r})"


class ConfigError(ValueError):
    """Parent exception for all errors related to run configurations"""


class ConfigKeyError(ConfigError):
    """Raised when a configuration key is unknown or carries a bad value"""

    def __init__(self, key: str, reason: str) -> None:
        self.key = key
        self.reason = reason

    def __str__(self) -> str:
        return f"Config key '{self.key}': {self.reason}"


class UnsupportedConfigFormatError(ConfigError):
    """Raised when a configuration file has an unknown extension"""

    def __init__(self, extension: str) -> None:
        self.extension = extension

    def __str__(self) -> str:
        return f"Unsupported file format: {self.extension}"
