"""Neural actor-critic with a grid-verified analysis toolkit."""

__version__ = "0.1.0"
