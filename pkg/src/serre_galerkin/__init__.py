"""Galerkin/B-spline solver for the periodic Serre (Green-Naghdi) equations.

The spatial discretization uses smooth periodic splines of order ``r`` on
a uniform mesh of ``[-L, L)``; time stepping is classical explicit RK4.
The hot assembly and banded-solve kernels come from a compiled extension
when it is available, with a numpy/scipy fallback (see
:mod:`serre_galerkin.kernels`).
"""

__version__ = "0.1.0"

from .errors import BlowUpError, CollisionAnalysisError, ConfigError, SizingError, SolverBreakdown
from .spline_space import (
    CyclicBandedMatrix,
    FieldCoeffs,
    PeriodicMesh,
    PeriodicSplineSpace,
    make_space,
)
from .semidiscrete import SerreOperator, SerreState, initial_state, project_elliptic_u0, project_l2, rhs
from .integrator import EvolutionRecord, TimeGrid, evolve, rk4_step, stability_probe
from .solutions import (
    GaussianProfile,
    ManufacturedSolution,
    SolitaryWave,
    WaveSum,
    amplitude_ordering_report,
    cb_amplitude_from_speed,
    cb_speed_from_amplitude,
    euler_amplitude_series,
    gaussian_initial_state,
    solitary_wave_eval,
)
from .diagnostics import (
    CollisionReport,
    ConvergenceReport,
    InvariantTriple,
    PeakTrace,
    PeakTracker,
    classify_collision,
    convergence_study,
    count_solitary_waves,
    error_norms,
    find_peaks,
    invariants,
    manufactured_solution_check,
    track_peaks,
)
from . import kernels

IMPLEMENTATION = kernels.IMPLEMENTATION
