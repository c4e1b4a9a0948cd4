"""Desk-scale toolkit for high-dimensional bond percolation.

Subpackages: lattice geometry, exact event algebra and enumeration oracle,
Monte Carlo sampling, Fourier-space diagram evaluation, infrared power
counting, and exponent extraction.
"""

__version__ = "0.1.0"
