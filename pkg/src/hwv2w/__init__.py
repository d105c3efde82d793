"""Hardware vulnerability to weakness mapping engine."""

__version__ = "0.1.0"
