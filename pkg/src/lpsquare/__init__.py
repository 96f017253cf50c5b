"""Littlewood-Paley square functions, Whitney cubes and weak-type (1,1) verification on grids."""

__version__ = "0.1.0"
