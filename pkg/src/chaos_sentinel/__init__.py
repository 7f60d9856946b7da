"""Chaotic-iteration sleep/wake scheduling for wireless video sensor networks."""

__version__ = "0.1.0"
