"""Layered dynamic map, task pipeline and restaurant simulator for a waiter robot."""

__version__ = "0.1.0"
