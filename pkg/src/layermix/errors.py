"""Exception types shared across modules."""


class ConfigError(ValueError):
    """Invalid configuration value (bad scheme string, negative penalty, ...)."""


class NumericalError(RuntimeError):
    """Training produced a non-finite loss."""

    def __init__(self, message: str, epoch: int | None = None, batch: int | None = None):
        super().__init__(message)
        self.epoch = epoch
        self.batch = batch
