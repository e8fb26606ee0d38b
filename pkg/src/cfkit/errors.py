"""Exception hierarchy shared by all cfkit modules."""


class CFError(Exception):
    """Base class for every error raised by cfkit."""


class DatasetError(CFError):
    pass


class ParseError(DatasetError):
    def __init__(self, path, line_number, message):
        self.path = str(path)
        self.line_number = line_number
        super().__init__(f"{self.path}:{line_number}: {message}")


class EmptyDatasetError(DatasetError):
    pass


class PipelineOrderError(CFError):
    """A pass ran before the step that produces its input."""

    def __init__(self, missing_key, needed_by):
        self.missing_key = missing_key
        self.needed_by = needed_by
        super().__init__(
            f"{needed_by} requires '{missing_key}' in the store; run the step that produces it first"
        )


class PassError(CFError):
    """A per-element action failed; the pass was aborted."""

    def __init__(self, index, cause):
        self.index = index
        self.cause = cause
        super().__init__(f"element {index} failed: {type(cause).__name__}: {cause}")


class EmptyTestSetError(CFError):
    pass


class TrainingDivergedError(CFError):
    def __init__(self, epoch, learning_rate):
        self.epoch = epoch
        self.learning_rate = learning_rate
        super().__init__(
            f"factor entries became non-finite at epoch {epoch} (learning rate {learning_rate})"
        )


class ConfigError(CFError):
    pass
