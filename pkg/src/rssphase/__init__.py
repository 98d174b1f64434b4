"""Stabilized (residual smoothing) time stepping for phase-field models on
compact finite-difference grids.

The submodules are:

* :mod:`~rssphase.operators` -- compact and second-order Neumann Laplacians
* :mod:`~rssphase.linalg` -- cosine-transform solves and spectral diagnostics
* :mod:`~rssphase.models` -- double-well potential, energies, image problems
* :mod:`~rssphase.schemes` -- single-step integrators
* :mod:`~rssphase.diagnostics` -- run histories, stability bounds, convergence
* :mod:`~rssphase.app` -- configuration, image I/O, time loops and the CLI
"""

from .errors import (
    ConvergenceError,
    DegeneratePhaseError,
    DiagnosticSizeError,
    DimensionError,
    ParameterError,
    RSSError,
    SizeError,
)
from .operators import (
    GridField,
    ImplicitOperator,
    Kind,
    TensorOperator,
    apply,
    build,
    build_cs2,
    build_lele,
    build_second_order,
    operator_pair,
    tensorize,
)
from .linalg import (
    HypothesisH,
    estimate_hypothesis_h,
    project_mean_zero,
    solve_constrained_lagrangian,
    solve_shifted,
    solve_shifted_squared,
)
from .models import DoubleWell, InpaintingProblem, SegmentationProblem
from .schemes import CHState, SAVState, Scheme, SchemeConfig
from .diagnostics import RunHistory, StabilityReport, convergence_study, predict_bounds, verify_monotone

__version__ = "0.1.0"

__all__ = [
    "ConvergenceError", "DegeneratePhaseError", "DiagnosticSizeError", "DimensionError",
    "ParameterError", "RSSError", "SizeError",
    "GridField", "ImplicitOperator", "Kind", "TensorOperator", "apply", "build", "build_cs2",
    "build_lele", "build_second_order", "operator_pair", "tensorize",
    "HypothesisH", "estimate_hypothesis_h", "project_mean_zero", "solve_constrained_lagrangian",
    "solve_shifted", "solve_shifted_squared",
    "DoubleWell", "InpaintingProblem", "SegmentationProblem",
    "CHState", "SAVState", "Scheme", "SchemeConfig",
    "RunHistory", "StabilityReport", "convergence_study", "predict_bounds", "verify_monotone",
]
