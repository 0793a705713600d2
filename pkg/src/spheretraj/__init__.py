"""Phase-amplitude separation and statistics for trajectories on the unit two-sphere."""

__version__ = "0.1.0"
