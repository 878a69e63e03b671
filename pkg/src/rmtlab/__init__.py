"""Monte Carlo laboratory for outlier eigenvalues of deformed Wigner matrices."""

__version__ = "0.1.0"
