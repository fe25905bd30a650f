"""gsdelab: numerics for G-expectations and SDEs driven by G-Brownian motion.

Upper expectations by Monte Carlo over volatility scenarios and by lattice
dynamic programming, the G-heat equation, continuity moduli with the Osgood
test and the Bihari inequality, and Euler / Picard / lattice BSDE solvers.
"""
__version__ = "0.1.0"

from .errors import CFLError, ConfigError, MemoryBudgetError, NumericalAbort, ValidationError
from .kernels import BACKEND
from .uncertainty import (GFunction, ScenarioControl, UncertaintySet, constant_control, enumerate_controls,
                          evaluate_g, sigma_bounds)
from .paths import PathBundle, TimeGrid, simulate_path
from .expectation import (Lattice, MonteCarloSetup, UpperExpectationEstimate, conditional_g_expectation,
                          upper_expectation_lattice, upper_expectation_mc)
from .gheat import PdeConfig, gnormal_expectation, solve_gheat
from .moduli import Modulus, osgood_test
from .bihari import BihariEnvelope, StepFunction, bihari_bound
from .coefficients import CoefficientSet, make_coefficients, truncate_coefficients
from .mollify import mollify

__all__ = [
    "__version__", "BACKEND", "CFLError", "ConfigError", "MemoryBudgetError", "NumericalAbort", "ValidationError",
    "GFunction", "ScenarioControl", "UncertaintySet", "constant_control", "enumerate_controls", "evaluate_g",
    "sigma_bounds", "PathBundle", "TimeGrid", "simulate_path", "Lattice", "MonteCarloSetup",
    "UpperExpectationEstimate", "conditional_g_expectation", "upper_expectation_lattice", "upper_expectation_mc",
    "PdeConfig", "gnormal_expectation", "solve_gheat", "Modulus", "osgood_test", "BihariEnvelope", "StepFunction",
    "bihari_bound", "CoefficientSet", "make_coefficients", "truncate_coefficients", "mollify",
]
