"""Analytics toolkit for IoT physical-location-monitoring sensor data."""

__version__ = "0.1.0"
