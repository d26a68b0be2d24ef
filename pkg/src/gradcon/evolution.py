"""Implicit Euler time stepping for the evolutionary constrained problem.

Each step solves one stationary problem whose load is built from the
previous state: testing the backward-difference inequality against the
feasible set gives a projection of ``u_prev + integral of the rate over the
step``, so the previous state enters with weight one.  (A variant that
weights the previous state by the step size is kept behind
``legacy_k_weight`` for comparison runs.)  The step integral of the rate
uses the midpoint rule.

With every boundary side flux-pinned, summing the balance equation over all
cells shows that the total held mass changes exactly by the poured mass,
up to the Newton tolerance; :func:`conservation_report` tabulates that
balance per step.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import fem
from .problems import ProblemSpec, source_values
from .solver import (DiscreteProblem, SolverConfig, SolverError,
                     continuation_solve, recovered_gradient)


@dataclass(frozen=True)
class EvolutionSpec:
    problem: ProblemSpec
    rate: object                    # SourceSpec, or callable t -> SourceSpec
    t_final: float
    dt: float
    u0: object = None               # None (zero), cell array, or callback
    config: SolverConfig = field(default_factory=SolverConfig)
    legacy_k_weight: bool = False

    def __post_init__(self):
        if not self.dt > 0.0:
            raise ValueError("time step must be positive")
        if self.t_final < self.dt:
            raise ValueError("final time must cover at least one step")


@dataclass
class StepDiagnostics:
    t: float
    poured: float                  # integral of the rate over the step and domain
    mass: float                    # integral of u at the end of the step
    mass_balance: float            # mass change minus poured mass
    newton_iterations: list
    residual_norms: list
    tau_final: float
    max_gradient_ratio: float


@dataclass
class Trajectory:
    spec: EvolutionSpec
    times: list
    u: list
    p: list
    steps: list                    # StepDiagnostics, one per step
    cell_areas: np.ndarray


def _rate_at(rate, t: float):
    return rate(t) if callable(rate) else rate


def _initial_state(spec: EvolutionSpec, dp: DiscreteProblem) -> np.ndarray:
    if spec.u0 is None:
        return np.zeros(dp.mesh.num_triangles)
    if callable(spec.u0):
        return fem.project_p0(dp.mesh, spec.u0, ws=dp.workspace)
    u0 = np.asarray(spec.u0, dtype=float)
    if u0.shape != (dp.mesh.num_triangles,):
        raise ValueError(f"initial state must have one value per cell, got {u0.shape}")
    return u0


def step(u_prev: np.ndarray, dp: DiscreteProblem, spec: EvolutionSpec,
         t0: float, t1: float):
    """Advance one implicit-Euler step over [t0, t1].

    Returns (u_next, p_next, DiscreteSolution) for the stationary solve with
    the effective load of this step.
    """
    k = t1 - t0
    ws = dp.workspace
    src = _rate_at(spec.rate, 0.5 * (t0 + t1))
    rate_q = np.broadcast_to(
        np.asarray(source_values(src, ws.qpoints[..., 0], ws.qpoints[..., 1]), dtype=float),
        ws.qpoints.shape[:2])
    prev_weight = k if spec.legacy_k_weight else 1.0
    f_eff_q = prev_weight * u_prev[:, None] + k * rate_q
    load = ws.areas * (f_eff_q @ ws.rule.weights)
    step_dp = dp.with_load(load, f_eff_q)
    try:
        sol, _ = continuation_solve(step_dp, spec.config)
    except SolverError as exc:
        raise RuntimeError(f"time step over [{t0:g}, {t1:g}] failed") from exc
    return sol.u, sol.p, sol


def run(spec: EvolutionSpec) -> Trajectory:
    """March ceil(t_final / dt) steps; frame n sits at time n * dt."""
    dp = DiscreteProblem.from_spec(spec.problem)
    ws = dp.workspace
    u = _initial_state(spec, dp)
    n_steps = math.ceil(spec.t_final / spec.dt - 1e-12)
    traj = Trajectory(spec=spec, times=[0.0], u=[u], p=[np.zeros(dp.mesh.num_edges)],
                      steps=[], cell_areas=ws.areas.copy())
    for n in range(1, n_steps + 1):
        t0, t1 = (n - 1) * spec.dt, n * spec.dt
        try:
            u_next, p_next, sol = step(u, dp, spec, t0, t1)
        except RuntimeError as exc:
            raise RuntimeError(f"evolution failed at step {n}") from exc
        src = _rate_at(spec.rate, 0.5 * (t0 + t1))
        rate_q = np.broadcast_to(
            np.asarray(source_values(src, ws.qpoints[..., 0], ws.qpoints[..., 1]), dtype=float),
            ws.qpoints.shape[:2])
        poured = spec.dt * float(np.einsum("q,tq,t->", ws.rule.weights, rate_q, ws.areas))
        mass = float(np.sum(ws.areas * u_next))
        prev_mass = float(np.sum(ws.areas * u))
        gnorm = np.linalg.norm(recovered_gradient(dp, p_next, sol.tau_final), axis=-1)
        traj.steps.append(StepDiagnostics(
            t=t1, poured=poured, mass=mass,
            mass_balance=mass - prev_mass - poured,
            newton_iterations=sol.newton_iterations,
            residual_norms=sol.residual_norms,
            tau_final=sol.tau_final,
            max_gradient_ratio=float(np.max(gnorm / dp.alpha_c)),
        ))
        traj.times.append(t1)
        traj.u.append(u_next)
        traj.p.append(p_next)
        u = u_next
    return traj


def conservation_report(traj: Trajectory):
    """Per-step mass balances: held-mass change minus poured mass.

    Meaningful when every boundary side is flux-pinned; otherwise a warning
    is emitted and the balances are reported anyway.
    """
    bp = traj.spec.problem.boundary
    if bp.gamma_d_sides:
        warnings.warn(
            "mass balance is not expected to close: boundary sides "
            f"{sorted(bp.gamma_d_sides)} let material escape", stacklevel=2)
    return [s.mass_balance for s in traj.steps]
