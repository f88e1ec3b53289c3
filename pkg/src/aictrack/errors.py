class AicError(Exception):
    """Base class for everything this package raises on purpose."""


class ConfigError(AicError, ValueError):
    def __init__(self, message, key=None):
        self.key = key
        super().__init__(f"{key}: {message}" if key else message)


class MetricUndefined(AicError, ValueError):
    pass


class DivergenceError(AicError, ArithmeticError):
    """A state or weight left the finite range.

    ``step`` is filled in by the episode loop; ``log`` carries the partial
    trajectory when the error escapes ``run_episode``.
    """

    def __init__(self, message, step=None):
        self.detail = message
        self.step = step
        self.log = None
        super().__init__(message)

    def __str__(self):
        if self.step is None:
            return self.detail
        return f"step {self.step}: {self.detail}"


class DynamicsBlowup(DivergenceError):
    pass


class IdentifierDiverged(DivergenceError):
    pass


class CriticDiverged(DivergenceError):
    pass


class ActorDiverged(DivergenceError):
    pass
