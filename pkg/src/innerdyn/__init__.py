"""innerdyn: boundary dynamics of hyperbolic inner functions of the unit disk."""

__version__ = "0.1.0"
