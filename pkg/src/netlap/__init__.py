"""Graph Laplacians on epsilon-nets over glued flat spaces, with boundary and
gluing corrections, reference spectra and convergence experiments."""

from . import geometry, harness, laplacian, operators, oracle, sampling, spectra

__all__ = ["geometry", "sampling", "laplacian", "spectra", "operators", "oracle", "harness"]

__version__ = "0.1.0"
