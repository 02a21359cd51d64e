"""Linear optimization over truncated moment cones and their dual polynomial cones."""
__version__ = "0.1.0"
