"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Bad or inconsistent user-supplied configuration."""


class ValidationError(ValueError):
    """Model parameters violate a structural requirement."""


class NumericalError(RuntimeError):
    """A numerical routine failed to reach its required tolerance."""
