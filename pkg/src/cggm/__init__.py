"""Joint variable and decomposable-graph selection for covariate-adjusted Gaussian graphical models."""

__version__ = "0.1.0"
