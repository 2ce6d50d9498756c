"""Converging eigenvalue brackets and high-accuracy approximants for
discrete states of singular half-line Schrodinger operators, built on
moment-equation representations of the wavefunction.

Modules
-------
numerics     arbitrary-precision scalars, Cholesky/Hankel kernels, 1-D search
problems     problem families, moment generators, reference weights, exact spectra
emm          Hankel-positivity feasibility and certified energy intervals
oppq         orthonormal-polynomial projection: secular roots and nested bounds
reconstruct  wavefunction samples and the half-line denseness demonstration
cli          command-line front end (CSV/JSON emitters)
"""

from .numerics import PrecScalar, SymMatrix
from .problems import Branch, Family, ProblemSpec, Representation

__all__ = [
    "Branch",
    "Family",
    "PrecScalar",
    "ProblemSpec",
    "Representation",
    "SymMatrix",
]

__version__ = "0.1.0"
