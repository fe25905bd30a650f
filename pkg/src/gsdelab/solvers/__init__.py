"""Forward G-SDE solvers (Euler, Picard, two-stage Picard), stability
experiments and the lattice G-BSDE solver."""
from .bsde import BsdeProblem, BsdeResult, bsde_solve
from .forward import SdeProblem, euler_all, euler_from_bundle, euler_solve, increments
from .picard import PicardTrace, picard_solve_h2, picard_solve_h2p
from .stability import StabilityReport, stability_experiment, stability_sweep

__all__ = [
    "BsdeProblem", "BsdeResult", "bsde_solve", "SdeProblem", "euler_all", "euler_from_bundle",
    "euler_solve", "increments", "PicardTrace", "picard_solve_h2", "picard_solve_h2p",
    "StabilityReport", "stability_experiment", "stability_sweep",
]
