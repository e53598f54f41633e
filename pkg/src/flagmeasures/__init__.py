"""Flag measures of convex polytopes."""

__version__ = "0.1.0"
