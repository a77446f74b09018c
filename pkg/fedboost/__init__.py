"""Asynchronous federated AdaBoost with adaptive synchronization, staleness decay and buffered uploads."""

__version__ = "0.1.0"
