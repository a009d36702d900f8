"""corrlab: computational laboratory for holomorphic correspondences on the Riemann sphere."""

__version__ = "0.1.0"
