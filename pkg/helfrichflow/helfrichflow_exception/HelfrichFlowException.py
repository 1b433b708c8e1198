class HelfrichFlowError(Exception):
    def __init__(self, message):
        super().__init__(message)


class SurfaceParameterError(HelfrichFlowError):
    def __init__(self, message):
        super().__init__(message)


class GridResolutionError(HelfrichFlowError):
    def __init__(self, message):
        super().__init__(message)


class GridMismatchError(HelfrichFlowError):
    def __init__(self, message):
        super().__init__(message)


class ReachViolationError(HelfrichFlowError):
    def __init__(self, message):
        super().__init__(message)


class DegenerateGeometryError(HelfrichFlowError):
    def __init__(self, message, node: tuple[int, int] | None = None):
        super().__init__(message)
        self.node = node


class NewtonConvergenceError(HelfrichFlowError):
    def __init__(self, message, residual: float | None = None):
        super().__init__(message)
        self.residual = residual


class LinearSolveError(HelfrichFlowError):
    def __init__(self, message):
        super().__init__(message)


class StepRejectedError(HelfrichFlowError):
    def __init__(self, message):
        super().__init__(message)


class DecayFitError(HelfrichFlowError):
    def __init__(self, message):
        super().__init__(message)


class CheckpointFormatError(HelfrichFlowError):
    def __init__(self, message):
        super().__init__(message)


class ConfigError(Exception):
    def __init__(self, message):
        super().__init__(message)


class OutputError(HelfrichFlowError):
    def __init__(self, message, path=None):
        super().__init__(message)
        self.path = path
