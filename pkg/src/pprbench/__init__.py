"""Personalized PageRank estimation benchmark.

Local push, shared random walks, hybrid pair estimators, submatrix
sketching, clustering metrics, and a simulated distributed sampler,
with a CSV-emitting command line front end (`ppr`).
"""

__version__ = "0.1.0"
