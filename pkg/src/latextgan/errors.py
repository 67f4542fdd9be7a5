class ConfigError(ValueError):
    """Invalid configuration value or combination."""


class CorpusError(ValueError):
    pass


class NumericError(FloatingPointError):
    """Raised when activations or losses stop being finite."""

    def __init__(self, message, iteration=None):
        if iteration is not None:
            message = f"{message} (iteration {iteration})"
        super().__init__(message)
        self.iteration = iteration


class CheckpointError(RuntimeError):
    pass


class VocabularyMismatch(ValueError):
    pass
