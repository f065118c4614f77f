"""deskhockey: desk-scale air-hockey RL testbed."""

__version__ = "0.1.0"
