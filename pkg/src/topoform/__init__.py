"""Topology-optimization dataset generation and real-time neural surrogates.

Two halves:

* a SIMP finite-element optimizer over parametrized 2D/3D problems, used to
  mass-produce (parameters -> optimal density + stress fields) samples;
* a small from-scratch neural-network engine (convolutional autoencoder +
  fully connected latent regressor) that learns the parameter-to-field map
  and serves predictions in real time.
"""

from .errors import BuildError, FormatError, OptimizerError, SolverError, TrainingError
from .fem import (
    BoundaryConditions,
    GridMesh,
    Material,
    assemble_stiffness,
    element_compliance,
    element_stiffness,
    solve_equilibrium,
)

__version__ = "0.1.0"
