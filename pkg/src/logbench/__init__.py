"""Toolkit for auditing event-sequence log data sets and running simple anomaly detection baselines."""

__version__ = "0.1.0"
