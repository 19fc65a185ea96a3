"""Stokes waves, their co-periodic stability spectrum and the Jordan normal form
of the zero eigenvalue at extrema of the wave momentum."""
from .errors import *  # noqa: F401,F403
from .grid import GridFunction
from .solver import (Branch, BranchPoint, ContinuationConfig, StokesWave,
                     babenko_residual, continue_branch, d_eta_dc,
                     linearized_apply, newton_solve, solve_steepness)

__version__ = "0.1.0"
