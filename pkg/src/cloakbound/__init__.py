"""Quasistatic cloaking bounds via Dirichlet-to-Neumann maps and effective operators.

The package is organised by layer:

``geometry``
    structured triangulations of a rectangle and obstacle masks.
``materials``
    piecewise dispersive permittivity laws and hypothesis checks.
``fem``
    P1 assembly, Dirichlet solves and the boundary Schur complement.
``hodge``
    the discrete orthogonal triple decomposition and the lift operator.
``composites``
    Z-problems, effective operators and variational/Wiener bounds.
``herglotz``
    scalar Herglotz/Stieltjes utilities and sum-rule numerics.
``cloaking``
    F(omega), F_inf and every cloaking bound check.
``cli``
    the ``cloakbound`` batch front-end.
"""

from cloakbound.geometry import Mesh, ObstacleMask, build_mesh, mark_obstacle
from cloakbound.materials import (
    AnisotropicLorentz,
    ConstantTensor,
    LorentzSum,
    PermittivityModel,
    Pole,
)
from cloakbound.fem import DtnOperator, StiffnessSystem, assemble, dtn_matrix
from cloakbound.hodge import HodgeBasis, build_hodge_basis
from cloakbound.composites import MultiplicationOperator, effective_operator
from cloakbound.cloaking import CloakProblem, SweepResult

__version__ = "0.1.0"

__all__ = [
    "AnisotropicLorentz",
    "CloakProblem",
    "ConstantTensor",
    "DtnOperator",
    "HodgeBasis",
    "LorentzSum",
    "Mesh",
    "MultiplicationOperator",
    "ObstacleMask",
    "PermittivityModel",
    "Pole",
    "StiffnessSystem",
    "SweepResult",
    "assemble",
    "build_hodge_basis",
    "build_mesh",
    "dtn_matrix",
    "effective_operator",
    "mark_obstacle",
]
