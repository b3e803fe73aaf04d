"""Exception types shared across the toolkit."""


class ToolkitError(Exception):
    """Base class for all toolkit-specific failures."""


class CorpusError(ToolkitError):
    """Raised for unreadable, empty, or invalid corpus files."""


class ConfigError(ToolkitError):
    """Raised for invalid or unknown configuration keys/values."""


class CheckpointError(ToolkitError):
    """Raised for corrupt or version-incompatible checkpoint files."""


class TrainingDiverged(ToolkitError):
    """Raised when the training loss becomes non-finite."""
