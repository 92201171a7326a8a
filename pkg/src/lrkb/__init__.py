"""Low-rank approximated Kalman-Bucy filtering for continuous-time LTI systems.

Submodules: ``spectral`` (eigen/Schur utilities), ``systems`` (LTI model and
PBH tests), ``oja`` (Oja flow on the Stiefel manifold), ``riccati`` (full and
reduced Riccati equations, rank condition), ``sim`` (SDE simulation, filters,
Monte Carlo), ``verify`` (theorem-verification suites), ``cli``.
"""

from lrkb._backend import BACKEND_NAME as kernel_backend
from lrkb.oja import StiefelFrame, random_stiefel, stable_equilibrium
from lrkb.riccati import rank_condition_report, reduced_steady_state, solve_are
from lrkb.systems import LtiSystem, load_system, make_system, minimal_rank

__version__ = "0.1.0"

__all__ = [
    "LtiSystem",
    "StiefelFrame",
    "kernel_backend",
    "load_system",
    "make_system",
    "minimal_rank",
    "random_stiefel",
    "rank_condition_report",
    "reduced_steady_state",
    "solve_are",
    "stable_equilibrium",
]
