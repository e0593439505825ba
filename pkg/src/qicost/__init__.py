"""Information costs of two-party quantum and classical protocols."""

__version__ = "0.1.0"
