"""Executable syntactic category of a pure-predicate first-order theory."""

__version__ = "0.1.0"
