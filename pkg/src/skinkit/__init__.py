"""Sensor-skin generation and time-of-flight point-cloud reconstruction."""

__version__ = "0.1.0"
