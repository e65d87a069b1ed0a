"""Flow-graph-driven multi-agent bug localization and repair."""

__version__ = "0.1.0"
