"""Quantum signal processing interferometry for single-shot displacement decisions."""

__version__ = "0.1.0"

from .decision import DecisionProblem, ErrorBreakdown, cat_perr, degree_bound, perr_analytic, perr_quadrature
from .errors import InvariantViolation, QSPIError, TruncationWarning
from .laurent import (
    LaurentPair,
    PhaseSequence,
    build_laurent_direct,
    build_laurent_recursive,
    read_phase_file,
    write_phase_file,
)
from .optimize import OptimizationResult, OptimizerConfig, optimize_phases, scaling_sweep, warm_start
from .response import ResponseSpectrum, response_coefficients, response_probability

__all__ = [
    "DecisionProblem",
    "ErrorBreakdown",
    "InvariantViolation",
    "LaurentPair",
    "OptimizationResult",
    "OptimizerConfig",
    "PhaseSequence",
    "QSPIError",
    "ResponseSpectrum",
    "TruncationWarning",
    "build_laurent_direct",
    "build_laurent_recursive",
    "cat_perr",
    "degree_bound",
    "optimize_phases",
    "perr_analytic",
    "perr_quadrature",
    "read_phase_file",
    "response_coefficients",
    "response_probability",
    "scaling_sweep",
    "warm_start",
    "write_phase_file",
]
