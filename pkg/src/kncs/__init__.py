"""K-quantum nonlinear coherent states in a truncated Fock basis."""
from .errors import (BracketFailure, DegenerateNullspace, DivergentSeries, Indeterminate,
                     KNCSError, NonexistentState, ZeroMeanOccupation)
from .existence import ExistenceVerdict, PhaseCurve, classify, critical_xi, phase_diagram
from .ion import DarkStateResult, Laser, LaserConfig, dark_state, dark_states, xi_from_lasers
from .model import Nonlinearity, StateSpec, f_superfactorial, f_value
from .numerics import SignedLogScalar, laguerre, log_factorial
from .observables import (MixedSpec, StatisticsReport, mandel, mixed_distribution,
                          mixed_weights, moment_a, moment_n, number_distribution, squeezing,
                          statistics)
from .states import (FockVector, build_state, closed_form_overlap, decompose, eigen_residual,
                     g_coefficient, normalization, overlap)

__all__ = [
    "BracketFailure", "DarkStateResult", "DegenerateNullspace", "DivergentSeries",
    "ExistenceVerdict", "FockVector", "Indeterminate", "KNCSError", "Laser", "LaserConfig",
    "MixedSpec", "Nonlinearity", "NonexistentState", "PhaseCurve", "SignedLogScalar",
    "StateSpec", "StatisticsReport", "ZeroMeanOccupation", "build_state", "classify",
    "closed_form_overlap", "critical_xi", "dark_state", "dark_states", "decompose",
    "eigen_residual", "f_superfactorial", "f_value", "g_coefficient", "laguerre",
    "log_factorial", "mandel", "mixed_distribution", "mixed_weights", "moment_a", "moment_n",
    "normalization", "number_distribution", "overlap", "phase_diagram", "squeezing",
    "statistics", "xi_from_lasers",
]
