__version__ = "0.1.0"
__date__ = "10-19-26"
