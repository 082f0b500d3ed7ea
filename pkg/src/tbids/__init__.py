"""Time-bound identity-based signatures over BLS12-381."""

__version__ = "0.1.0"
