"""Simulation and analysis of quantum network coding on the butterfly network."""

__version__ = "0.1.0"
