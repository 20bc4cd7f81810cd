"""Entropy of Gaussian states for a system coupled to an environment.

Two models are provided: a harmonic oscillator linearly coupled to a finite
oscillator bath (exact and master-equation evolution), and a scalar field
mode coupled cubically to a massless thermal field (stationary solution from
the one-loop self-mass and two-time evolution with memory kernels).
"""

__version__ = "0.1.0"

from .errors import (
    DecoherenceError,
    DomainError,
    FitFailed,
    HeisenbergViolation,
    NumericalError,
    ThermalInstability,
    UnderResolvedPeak,
    UnstableModel,
    ValidationError,
    WindowTooShort,
)
from .gaussian import (
    CorrelatorTriple,
    area_from_moments,
    entropy_from_area,
    entropy_from_symplectic,
    free_thermal_area,
    phase_space_area,
    symplectic_eigenvalues,
    triple_from_statistical,
)
from .kadanoff_baym import TwoTimeGrid, available_backends, evolve_kb, run_kb
from .kernels import MemoryKernels, build_kernels
from .oscillators import OscillatorModel, build_model, run_qm, solve_master
from .rates import RateFit, extract_rate
from .selfmass import (
    QftParams,
    SelfMassSpectrum,
    StationarySolution,
    decay_rate_closed_form,
    im_retarded_selfmass,
    re_retarded_selfmass,
    solve_stationary,
    spectral_function,
    stationary_statistical,
    tabulate_selfmass,
)

__all__ = [
    "CorrelatorTriple",
    "DecoherenceError",
    "DomainError",
    "FitFailed",
    "HeisenbergViolation",
    "MemoryKernels",
    "NumericalError",
    "OscillatorModel",
    "QftParams",
    "RateFit",
    "SelfMassSpectrum",
    "StationarySolution",
    "ThermalInstability",
    "TwoTimeGrid",
    "UnderResolvedPeak",
    "UnstableModel",
    "ValidationError",
    "WindowTooShort",
    "area_from_moments",
    "available_backends",
    "build_kernels",
    "build_model",
    "decay_rate_closed_form",
    "entropy_from_area",
    "entropy_from_symplectic",
    "evolve_kb",
    "extract_rate",
    "free_thermal_area",
    "im_retarded_selfmass",
    "phase_space_area",
    "re_retarded_selfmass",
    "run_kb",
    "run_qm",
    "solve_master",
    "solve_stationary",
    "spectral_function",
    "stationary_statistical",
    "symplectic_eigenvalues",
    "tabulate_selfmass",
    "triple_from_statistical",
]
