"""Harmonic balance and time integration of friction-damped oscillators."""

from .contact import ContactParams, ContactState, ContactTrace, evaluate_periodic_trace
from .errors import (ContractViolation, ConvergenceError, FrictionHbError, IntegrationError,
                     StaticSolveError, ValidationError)
from .harmonics import HarmonicSet, aft_contact_forces, extract, reconstruct
from .hbm import HbmConfig, HbmSolution, FrfCurve, StaticState, solve_static, sweep
from .model import SystemModel, Table1Params, build_two_dof

__version__ = "0.1.0"

__all__ = [
    "ContactParams", "ContactState", "ContactTrace", "evaluate_periodic_trace",
    "ContractViolation", "ConvergenceError", "FrictionHbError", "IntegrationError",
    "StaticSolveError", "ValidationError", "HarmonicSet", "aft_contact_forces", "extract",
    "reconstruct", "HbmConfig", "HbmSolution", "FrfCurve", "StaticState", "solve_static",
    "sweep", "SystemModel", "Table1Params", "build_two_dof",
]
