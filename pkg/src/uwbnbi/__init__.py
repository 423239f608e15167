"""Narrowband interference on full- and finite-resolution IR-UWB receivers."""

__version__ = "0.1.0"
