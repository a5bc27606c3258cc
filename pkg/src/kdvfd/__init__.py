"""Implicit finite-difference solver for the Korteweg-de Vries equation."""

from .banded import BandedOperator, Factorization, SingularOperatorError, assemble, factor, solve
from .diagnostics import (
    ConvergenceRow,
    EnergyLedger,
    StepDiagnostics,
    convergence_table,
    kato_budget,
    relative_error,
    weighted_energy,
)
from .exact import TwoSolitonParams, l2_singular_init, one_soliton, two_soliton
from .grid import Boundary, Difference, GridFunction, WeightFunction, average, build_weight, difference, inner, norms, shift
from .presets import ExperimentPreset, parse_config, preset, run_preset
from .scheme import DtRule, SchemeConfig, SchemeInstability, Trajectory, interpolate, max_lambda, run, step

__version__ = "0.1.0"
