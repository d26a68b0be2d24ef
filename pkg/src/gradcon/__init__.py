"""Solvers for non-diffusive variational problems with gradient constraints.

The package discretizes the flux-side (pre-dual) formulation with lowest
order Raviart-Thomas / piecewise-constant mixed finite elements, smooths the
nonsmooth norm term with a Huber kernel, and drives a damped Newton method
through a continuation schedule in the smoothing radius.
"""

from .mesh import (ALL_DIRICHLET, ALL_NEUMANN, BoundaryPartition, Mesh, Rect,
                   UNIT_SQUARE, build_rect_mesh, classify_boundary,
                   element_geometry)
from .problems import (SCENARIOS, ConstantAlpha, ConstantSource, HalfPlane,
                       HalfPlaneSource, MeasureLineAlpha, PiecewiseAlpha,
                       PresetSource, ProblemSpec, StudyResult, alpha_at,
                       convergence_study, exact_solution_ex1, scenario)
from .solver import (Diagnostics, DiscreteProblem, DiscreteSolution,
                     LineSearchConfig, LineSearchStalled,
                     MaxIterationsExceeded, SolverConfig, SolverError,
                     continuation_solve, diagnostics, newton_solve,
                     recover_u, recovered_gradient, residual, tau_schedule)
from .evolution import (EvolutionSpec, Trajectory, conservation_report,
                        run as run_evolution, step as evolution_step)

__version__ = "0.1.0"

__all__ = [
    "ALL_DIRICHLET", "ALL_NEUMANN", "BoundaryPartition", "Mesh", "Rect",
    "UNIT_SQUARE", "build_rect_mesh", "classify_boundary", "element_geometry",
    "SCENARIOS", "ConstantAlpha", "ConstantSource", "HalfPlane",
    "HalfPlaneSource", "MeasureLineAlpha", "PiecewiseAlpha", "PresetSource",
    "ProblemSpec", "StudyResult", "alpha_at", "convergence_study",
    "exact_solution_ex1", "scenario",
    "Diagnostics", "DiscreteProblem", "DiscreteSolution", "LineSearchConfig",
    "LineSearchStalled", "MaxIterationsExceeded", "SolverConfig",
    "SolverError", "continuation_solve", "diagnostics", "newton_solve",
    "recover_u", "recovered_gradient", "residual", "tau_schedule",
    "EvolutionSpec", "Trajectory", "conservation_report", "run_evolution",
    "evolution_step",
]
