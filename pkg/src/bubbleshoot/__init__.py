"""Radial blow-up solutions of -u'' - u'/r = lambda h f(u) and their bubble towers."""

__version__ = "0.1.0"
