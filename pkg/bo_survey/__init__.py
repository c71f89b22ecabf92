"""
BO Survey - Bayesian optimization driven survey sampling designs
"""

__version__ = "0.1.0"
