"""
Bayesian causal impact for spatially correlated multivariate time series.
"""

__version__ = "0.1.0"
