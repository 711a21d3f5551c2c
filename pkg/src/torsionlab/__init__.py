"""Numerical analytic torsion of Z2-graded elliptic complexes on flat tori."""
__version__ = "0.1.0"
