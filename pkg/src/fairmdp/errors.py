class ConfigurationError(ValueError):
    """Raised when inputs violate a structural precondition (shapes, simplex
    constraints, unverified separators, malformed files)."""
