"""Newton continuation for the smoothed primal-dual optimality system.

The discrete system in the flux unknowns P (edge DOFs) and cell values u is

    r1(P, u) = -B^T u + H_tau(P) = 0        (flux equation)
    r2(P, u) = M u + B P - F       = 0        (balance equation)

with B the divergence pairing, M the diagonal P0 mass, F the load and
H_tau the smoothed-norm residual.  M is diagonal, so u is eliminated
exactly, u(P) = M^{-1}(F - B P), and Newton runs on the reduced residual

    R(P) = -B^T u(P) + H_tau(P),     dR/dP = G_tau(P) + B^T M^{-1} B =: S(P),

an SPD system solved directly.  A backtracking line search on the squared
residual norm globalizes each step.  The smoothing radius tau follows a
geometric continuation schedule, each stage warm-started from the last; the
first stage starts from zero.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import fem, huber, linalg
from .mesh import classify_boundary
from .problems import ProblemSpec, alpha_values, source_values


@dataclass(frozen=True)
class LineSearchConfig:
    shrink: float = 0.5
    sufficient_decrease: float = 1e-4
    max_backtracks: int = 30

    def __post_init__(self):
        if not 0.0 < self.shrink < 1.0:
            raise ValueError("line-search shrink factor must be in (0, 1)")
        if not 0.0 < self.sufficient_decrease < 1.0:
            raise ValueError("sufficient decrease must be in (0, 1)")
        if self.max_backtracks < 0:
            raise ValueError("max_backtracks must be nonnegative")


@dataclass(frozen=True)
class SolverConfig:
    tau_start: float = 10.0
    tau_factor: float = 1.30
    tau_min: float = 1e-6
    newton_tol: float = 1e-8          # absolute residual norms
    newton_max_iter: int = 50
    linesearch: LineSearchConfig = field(default_factory=LineSearchConfig)
    linear_tol: float = 1e-10         # relative residual of each linear solve

    def __post_init__(self):
        if not self.tau_factor > 1.0:
            raise ValueError("continuation factor must exceed 1")
        for name in ("tau_start", "tau_min", "newton_tol", "linear_tol"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be positive")
        if self.tau_start < self.tau_min:
            raise ValueError("tau_start must be at least tau_min")
        if self.newton_max_iter < 1:
            raise ValueError("newton_max_iter must be at least 1")


def tau_schedule(config: SolverConfig) -> np.ndarray:
    """Geometric schedule from tau_start down to the first value <= tau_min."""
    taus = [config.tau_start]
    while taus[-1] > config.tau_min:
        taus.append(taus[-1] / config.tau_factor)
    return np.array(taus)


class SolverError(RuntimeError):
    """Base class for Newton failures; carries the failing smoothing radius."""

    def __init__(self, message: str, tau: float, r1_norm: float, r2_norm: float):
        super().__init__(f"{message} (tau={tau:.3e}, |r1|={r1_norm:.3e}, |r2|={r2_norm:.3e})")
        self.tau = tau
        self.r1_norm = r1_norm
        self.r2_norm = r2_norm


class MaxIterationsExceeded(SolverError):
    pass


class LineSearchStalled(SolverError):
    pass


@dataclass(frozen=True)
class DiscreteProblem:
    """Assembled, immutable view of a problem on one mesh."""

    spec: ProblemSpec
    mesh: object
    workspace: fem.Workspace
    B: sp.csr_matrix
    Bt: sp.csr_matrix
    areas: np.ndarray
    schur0: sp.csr_matrix          # B^T M^{-1} B
    load: np.ndarray               # F
    source_q: np.ndarray           # source at quadrature points (nt, nq)
    alpha_q: np.ndarray            # bound at quadrature points (nt, nq)
    alpha_c: np.ndarray            # bound at centroids (nt,)
    neumann_edges: np.ndarray
    free: np.ndarray | None        # bool mask over edges, None when all free

    @classmethod
    def from_spec(cls, spec: ProblemSpec) -> "DiscreteProblem":
        from .mesh import build_rect_mesh

        mesh = build_rect_mesh(spec.rect, spec.nx, spec.ny)
        ws = fem.build_workspace(mesh)
        B = fem.assemble_div(mesh)
        areas = ws.areas
        Bt = B.T.tocsr()
        schur0 = (Bt @ sp.diags(1.0 / areas) @ B).tocsr()
        source_q = source_values(spec.source, ws.qpoints[..., 0], ws.qpoints[..., 1])
        source_q = np.broadcast_to(np.asarray(source_q, dtype=float),
                                   ws.qpoints.shape[:2]).copy()
        load = areas * (source_q @ ws.rule.weights)
        alpha_q = np.asarray(alpha_values(spec.alpha, mesh,
                                          ws.qpoints[..., 0], ws.qpoints[..., 1]), dtype=float)
        alpha_c = np.asarray(alpha_values(spec.alpha, mesh,
                                          ws.centroids[:, 0], ws.centroids[:, 1]), dtype=float)
        if np.any(alpha_q <= 0.0) or np.any(alpha_c <= 0.0):
            raise ValueError("constraint bound must be positive throughout the domain")
        _, neumann = classify_boundary(mesh, spec.boundary)
        if len(neumann):
            free = np.ones(mesh.num_edges, dtype=bool)
            free[neumann] = False
        else:
            free = None
        return cls(spec=spec, mesh=mesh, workspace=ws, B=B, Bt=Bt, areas=areas,
                   schur0=schur0, load=load, source_q=source_q,
                   alpha_q=alpha_q, alpha_c=alpha_c,
                   neumann_edges=neumann, free=free)

    def with_load(self, load: np.ndarray, source_q: np.ndarray) -> "DiscreteProblem":
        """Same operators with a different right-hand side (time stepping)."""
        return dataclasses.replace(self, load=np.asarray(load, dtype=float),
                                   source_q=np.asarray(source_q, dtype=float))


def recover_u(dp: DiscreteProblem, p: np.ndarray) -> np.ndarray:
    """Cell values from the balance equation: u = M^{-1}(F - B p)."""
    return (dp.load - dp.B @ p) / dp.areas


def residual(dp: DiscreteProblem, p: np.ndarray, u: np.ndarray, tau: float):
    """The pair (r1, r2); flux rows on pinned edges are zeroed."""
    r1 = -(dp.Bt @ u) + fem.assemble_huber_residual(
        dp.mesh, p, dp.alpha_q, tau, ws=dp.workspace)
    if dp.free is not None:
        r1[~dp.free] = 0.0
    r2 = dp.areas * u + dp.B @ p - dp.load
    return r1, r2


def residual_norms(dp: DiscreteProblem, r1: np.ndarray, r2: np.ndarray):
    """Euclidean norm of the flux residual, mass-weighted norm of the balance."""
    r1n = float(np.linalg.norm(r1 if dp.free is None else r1[dp.free]))
    r2n = float(np.sqrt(np.sum(r2 * r2 / dp.areas)))
    return r1n, r2n


def _reduced_residual(dp: DiscreteProblem, p: np.ndarray, tau: float) -> np.ndarray:
    u = recover_u(dp, p)
    r = -(dp.Bt @ u) + fem.assemble_huber_residual(
        dp.mesh, p, dp.alpha_q, tau, ws=dp.workspace)
    if dp.free is not None:
        r[~dp.free] = 0.0
    return r


def newton_solve(dp: DiscreteProblem, tau: float, p0: np.ndarray,
                 config: SolverConfig | None = None):
    """Damped Newton on the reduced residual; returns (p, iterations, |r|).

    The cell variable is eliminated exactly at every iterate, so the
    balance equation holds up to rounding throughout.
    """
    config = config or SolverConfig()
    ls = config.linesearch
    p = np.array(p0, dtype=float)
    if dp.free is not None:
        p[~dp.free] = 0.0

    r = _reduced_residual(dp, p, tau)
    rnorm = float(np.linalg.norm(r))
    iterations = 0
    while rnorm > config.newton_tol:
        if iterations >= config.newton_max_iter:
            raise MaxIterationsExceeded("Newton did not converge", tau, rnorm, 0.0)
        G = fem.assemble_huber_jacobian(dp.mesh, p, dp.alpha_q, tau, ws=dp.workspace)
        S = (G + dp.schur0).tocsr()
        if dp.free is None:
            step, _ = linalg.solve_spd(S, -r, tol=config.linear_tol)
        else:
            Sff = S[dp.free][:, dp.free]
            step_f, _ = linalg.solve_spd(Sff, -r[dp.free], tol=config.linear_tol)
            step = np.zeros_like(p)
            step[dp.free] = step_f

        merit0 = rnorm * rnorm
        s = 1.0
        accepted = False
        for _ in range(ls.max_backtracks + 1):
            trial = p + s * step
            r_trial = _reduced_residual(dp, trial, tau)
            m_trial = float(r_trial @ r_trial)
            if m_trial <= (1.0 - 2.0 * ls.sufficient_decrease * s) * merit0:
                accepted = True
                break
            s *= ls.shrink
        if not accepted:
            raise LineSearchStalled("line search made no progress", tau, rnorm, 0.0)
        p, r, rnorm = trial, r_trial, float(np.sqrt(m_trial))
        iterations += 1
    return p, iterations, rnorm


@dataclass(frozen=True)
class Diagnostics:
    primal_value: float        # flux-side objective (unsmoothed)
    dual_value: float          # height-side objective, sign-flipped
    duality_gap: float
    max_gradient_ratio: float  # max over cells of |grad u| / alpha
    feasibility_violation: float

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass
class DiscreteSolution:
    p: np.ndarray
    u: np.ndarray
    tau_final: float
    tau_values: np.ndarray
    newton_iterations: list
    residual_norms: list       # (|r1|, |r2|) per stage
    gap_history: list          # duality gap per stage


def recovered_gradient(dp: DiscreteProblem, p: np.ndarray, tau: float) -> np.ndarray:
    """Per-cell gradient reconstruction -alpha * dphi_tau(p_h) at centroids."""
    pc = fem.rt0_at_centroids(dp.workspace, p)
    return -dp.alpha_c[:, None] * huber.dphi(pc, tau)


def diagnostics(dp: DiscreteProblem, p: np.ndarray, u: np.ndarray, tau: float) -> Diagnostics:
    ws = dp.workspace
    w = ws.rule.weights
    pq = fem.rt0_at_quadrature(ws, p)
    pnorm = np.linalg.norm(pq, axis=-1)
    misfit = (dp.B @ p) / dp.areas
    misfit = misfit[:, None] - dp.source_q
    primal = 0.5 * float(np.einsum("q,tq,t->", w, misfit**2, ws.areas))
    primal += float(np.einsum("q,tq,tq,t->", w, dp.alpha_q, pnorm, ws.areas))
    dual = float(dp.load @ u - 0.5 * np.sum(dp.areas * u * u))
    grad = recovered_gradient(dp, p, tau)
    gnorm = np.linalg.norm(grad, axis=-1)
    ratio = float(np.max(gnorm / dp.alpha_c)) if len(gnorm) else 0.0
    violation = float(np.sum(dp.areas * np.maximum(0.0, gnorm - dp.alpha_c)))
    return Diagnostics(primal_value=primal, dual_value=dual,
                       duality_gap=primal - dual,
                       max_gradient_ratio=ratio,
                       feasibility_violation=violation)


def continuation_solve(problem, config: SolverConfig | None = None,
                       verbose: bool = False):
    """Run the full continuation schedule; returns (DiscreteSolution, Diagnostics).

    Each stage is warm-started from the previous one; the first stage starts
    from zero.  Newton failures propagate annotated with the failing stage.
    """
    dp = problem if isinstance(problem, DiscreteProblem) else DiscreteProblem.from_spec(problem)
    config = config or SolverConfig()
    taus = tau_schedule(config)

    p = np.zeros(dp.mesh.num_edges)
    iteration_counts, norms, gaps = [], [], []
    for tau in taus:
        p, iters, r1n = newton_solve(dp, tau, p, config)
        u = recover_u(dp, p)
        r2 = dp.areas * u + dp.B @ p - dp.load
        r2n = float(np.sqrt(np.sum(r2 * r2 / dp.areas)))
        iteration_counts.append(iters)
        norms.append((r1n, r2n))
        gaps.append(diagnostics(dp, p, u, tau).duality_gap)
        if verbose:
            print(f"tau={tau:10.4e}  newton={iters:2d}  |r1|={r1n:9.3e}  |r2|={r2n:9.3e}")

    sol = DiscreteSolution(p=p, u=u, tau_final=float(taus[-1]), tau_values=taus,
                           newton_iterations=iteration_counts,
                           residual_norms=norms, gap_history=gaps)
    return sol, diagnostics(dp, p, u, sol.tau_final)
