"""Certified elimination of real zeros near s = 1 for quadratic Dirichlet
L-functions: ball arithmetic, explicit inequality constants, and a
multi-pass verification campaign over candidate discriminants."""

__version__ = "0.1.0"
