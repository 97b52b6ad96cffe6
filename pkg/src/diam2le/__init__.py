"""Leader election in diameter-two networks: simulator, protocols and bound checks."""

__version__ = "0.1.0"
