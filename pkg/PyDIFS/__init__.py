"""
PyDIFS - discrete iterated function systems on uniform delta-grids.

This package holds the Django project configuration shared by the grid,
affine, absorbing, stats, difs, render, verify and runs apps.
"""

__version__ = '1.0.0'
