"""Sparse-grid polynomial chaos uncertainty quantification for linear poroelasticity."""
__version__ = "0.1.0"
