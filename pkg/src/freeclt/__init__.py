"""Operator-valued free central limit theorem toolkit.

Modules
-------
matlin       matrix norms, inverses and the certified domains
freemoments  scalar and joint free moments and cumulants
opmodel      operator models and the Neumann series of their Cauchy transforms
scsolver     fixed-point solver for operator-valued semicircular elements
linpoly      noncommutative polynomials and their linearizations
cltlab       convergence-rate experiments and Monte Carlo checks
spectra      densities and distribution functions from Cauchy transforms
cli          command-line front end
"""

from .errors import *  # noqa: F401,F403
from .freemoments import (BaseLaw, FreeFamilySpec, bernoulli, clt_cumulants, custom_moments,
                          joint_moment, semicircular, two_atom)
from .linpoly import CauchyEvalConfig, LinearPencil, NcPoly, linearize, scalar_cauchy_from_pencil
from .matlin import CertifiedConstants, OmegaParams, op_norm
from .opmodel import OperatorModel, SumModel, cauchy_series
from .scsolver import SemicircularSpec, solve_cauchy

__version__ = "0.1.0"
