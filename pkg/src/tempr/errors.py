class ConfigError(ValueError):
    """Invalid configuration or arguments (CLI exit code 2)."""


class FormatError(ValueError):
    """Malformed or truncated on-disk dataset/checkpoint data."""
