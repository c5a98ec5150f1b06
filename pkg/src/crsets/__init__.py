"""Countable random sets: set algebra, σ-fields, selection, models, hitting functions and law comparison."""

__version__ = "0.1.0"
