"""Exception types shared across the package."""


class InputError(ValueError):
    """Invalid or unreadable user-supplied input (file, field, or flag)."""


class PipelineError(RuntimeError):
    """A pipeline stage could not produce a result from valid inputs."""
