"""Exception hierarchy.

Each family maps onto one CLI exit code: configuration problems exit 2,
data problems exit 3 and numerical failures exit 4.
"""


class HelmGPError(Exception):
    exit_code = 1


class ConfigError(HelmGPError):
    exit_code = 2


class DataError(HelmGPError):
    exit_code = 3


class SchemaError(DataError):
    pass


class CorruptInputError(DataError):
    pass


class EmptySelectionError(DataError):
    pass


class OutOfDomainError(DataError):
    def __init__(self, buoy, time, position):
        self.buoy = buoy
        self.time = time
        self.position = tuple(position)
        super().__init__(
            f"buoy {buoy} left the grid at t={time:.6g} "
            f"(position {self.position[0]:.6g}, {self.position[1]:.6g})")


class NumericalError(HelmGPError):
    exit_code = 4


class DerivativeOrderError(NumericalError, ValueError):
    pass


class SingularKernelError(NumericalError):
    def __init__(self, jitter, message=None):
        self.jitter = jitter
        super().__init__(
            message or f"Gram matrix not positive definite after jitter {jitter:.3e}")


class NegativeVarianceError(NumericalError):
    pass


class GradientError(NumericalError):
    def __init__(self, coordinate, value):
        self.coordinate = coordinate
        self.value = value
        super().__init__(
            f"objective not finite when perturbing log-parameter {coordinate} ({value})")


class DivergedError(NumericalError):
    def __init__(self, message, trace):
        self.trace = list(trace)
        super().__init__(message)
