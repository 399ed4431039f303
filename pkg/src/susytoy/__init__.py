"""Spectral toolkit for the supersymmetric x^2 y^2 model in weighted spaces."""
from .eigensolve import CountResult, SpectralResult, count_negative, lowest_eigenpairs
from .operators import (Box2D, SparseHermitianOperator, WeightSpec, assemble_hamiltonian,
                        assemble_shifted, assemble_supercharge, assemble_weight)

__version__ = "0.1.0"

__all__ = [
    "Box2D",
    "WeightSpec",
    "SparseHermitianOperator",
    "assemble_hamiltonian",
    "assemble_supercharge",
    "assemble_weight",
    "assemble_shifted",
    "count_negative",
    "lowest_eigenpairs",
    "SpectralResult",
    "CountResult",
]
