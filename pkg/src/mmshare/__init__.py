"""Base-station sharing in mmWave cellular networks: simulator and duopoly solver."""

__version__ = "0.1.0"

from mmshare.errors import (  # noqa: F401
    ConfigError,
    DegenerateMarketError,
    InvalidParameterError,
)
