"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Bad arguments, malformed configuration, or data violating a contract."""


class SchemaError(ValidationError):
    """An on-disk file does not match the documented layout."""


class NumericalError(RuntimeError):
    """A computation is too ill-conditioned to produce a trustworthy result."""


class StageError(RuntimeError):
    """A pipeline stage failed; carries the stage name and the original error."""

    def __init__(self, stage, cause):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause
