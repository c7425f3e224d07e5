"""Numerical laboratory for a penalized insulation-design free-boundary
problem: p-Dirichlet energies with obstacle and volume penalties, limit
schedules in the penalty parameters, free-boundary extraction, and
oracle-based verification."""

__version__ = "0.1.0"
