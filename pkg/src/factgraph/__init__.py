"""Interactive graph learning engine for news source factuality detection."""

__version__ = "0.1.0"
