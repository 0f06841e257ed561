"""Laplace transforms of squared-Bessel-type diffusions, checked against Monte Carlo."""

from . import errors
from .identities import IdentityReport, check_identity, suite_entries
from .joint import joint_laplace
from .processes import (
    BAff,
    CoshBM,
    GBesqI,
    GBesqII,
    GeomAssoc,
    Jacobi,
    Pgsce,
    SquaredBesselBridge,
    SquaredRadialOU,
    TransformQuery,
    coefficients,
    gbesq2_phi_psi,
    laplace_marginal,
    srou_displayed_transform,
)
from .sde import MCEstimate, PathFunctional, SimConfig, joint_functional, laplace_functional, mc_expectation

__version__ = "0.1.0"
