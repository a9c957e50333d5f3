"""Adaptive biasing force sampling with Helmholtz-projected mean forces."""

from .fields import Grid2, ScalarField, VectorField2, WeightField
from .force_estimator import BinnedForceAccumulator
from .helmholtz import gradient_at_bins, project_1d, project_neumann, project_periodic_weighted
from .langevin import ReplicaEnsemble, RunSetup, ToyModel, TrimerModel, run, step
from .oracle import ToySystem, dense_projection_solve, reference_free_energy, reference_mean_force
from .potentials import PairPotentialParams, ParticleConfiguration, ToyPotential

__version__ = "0.1.0"

__all__ = [
    "BinnedForceAccumulator",
    "Grid2",
    "PairPotentialParams",
    "ParticleConfiguration",
    "ReplicaEnsemble",
    "RunSetup",
    "ScalarField",
    "ToyModel",
    "ToyPotential",
    "ToySystem",
    "TrimerModel",
    "VectorField2",
    "WeightField",
    "dense_projection_solve",
    "gradient_at_bins",
    "project_1d",
    "project_neumann",
    "project_periodic_weighted",
    "reference_free_energy",
    "reference_mean_force",
    "run",
    "step",
]
