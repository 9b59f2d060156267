class InvalidParameterError(ValueError):
    """A model parameter is outside its admissible range."""


class DegenerateMarketError(InvalidParameterError):
    """Marginal consumers are undefined (identical qualities in a priced market)."""


class ConfigError(InvalidParameterError):
    """Configuration file could not be parsed or failed validation."""
