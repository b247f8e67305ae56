"""Monte Carlo laboratory for arm events of critical planar FK-percolation."""

__version__ = "0.1.0"
