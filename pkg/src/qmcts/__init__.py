"""Quasi-Monte Carlo time-splitting toolkit for the 1D Schrodinger equation
with a truncated Gaussian (Karhunen-Loeve) random potential.

The package combines a split-step Fourier solver on the periodic torus with
randomly shifted rank-1 lattice sampling (CBC-constructed generating vectors,
POD weights) and a Monte Carlo baseline, plus an experiment harness for
convergence studies of the expected position and current densities.
"""

__version__ = "0.1.0"

from .grid import TorusGrid, WaveField
from .potential import KLPotential, build_cosine_potential
from .splitting import SplittingScheme, lie_scheme, strang_scheme

__all__ = [
    "TorusGrid",
    "WaveField",
    "KLPotential",
    "build_cosine_potential",
    "SplittingScheme",
    "lie_scheme",
    "strang_scheme",
    "__version__",
]
