"""Nonlocal obstacle and semilinear problems on the Heisenberg group H^N.

Submodules: hgroup (group arithmetic), kernels, grid, assembly (discrete form
and operator), obstacle, mountain_pass, expr/config/cli (batch front-end).
"""
from .errors import HvarError, ResourceError, SingularityError, SolverError, UsageError
from .hgroup import GroupElement, VectorFieldStencil
from .kernels import KernelSpec, check_admissible, custom_kernel, fractional_kernel
from .grid import DomainSpec, Grid, box, build_grid, koranyi_ball
from .assembly import StiffnessForm, apply_operator, assemble_stiffness, z0_norm
from .obstacle import ObstacleProblem, solve_penalized, solve_vi_psor, verify_lewy_stampacchia
from .mountain_pass import Nonlinearity, SemilinearProblem, solve_mountain_pass

__version__ = "0.1.0"
