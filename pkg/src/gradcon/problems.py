"""Problem data: constraint bounds, sources, reference solutions, scenarios.

The constraint bound is either a positive constant, a piecewise-constant
function over half-plane regions, or a weighted-line measure mollified into
a thin strip whose density scales like 1/h with the mesh size.  Sources are
constants, half-plane indicators, or named presets.  All evaluators are
pure and vectorized over point arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .mesh import ALL_DIRICHLET, UNIT_SQUARE, BoundaryPartition, Mesh, Rect

# strip width of the mollified line bound, in multiples of the mesh size
LINE_STRIP_CELLS = 100.0


@dataclass(frozen=True)
class HalfPlane:
    """Closed half-plane a*x + b*y <= c."""

    a: float
    b: float
    c: float

    def contains(self, x, y):
        return self.a * np.asarray(x) + self.b * np.asarray(y) <= self.c


# --- constraint bounds -----------------------------------------------------

@dataclass(frozen=True)
class ConstantAlpha:
    value: float

    def __post_init__(self):
        if not self.value > 0.0:
            raise ValueError(f"constraint bound must be positive, got {self.value}")

    def evaluate(self, mesh, x, y):
        return np.full(np.broadcast(x, y).shape, self.value)


@dataclass(frozen=True)
class PiecewiseAlpha:
    """First matching region wins; ``default`` covers the rest."""

    regions: tuple  # of (HalfPlane, value)
    default: float

    def __post_init__(self):
        object.__setattr__(self, "regions", tuple(self.regions))
        values = [v for _, v in self.regions] + [self.default]
        if any(not v > 0.0 for v in values):
            raise ValueError(f"constraint bound must be positive, got {min(values)}")

    def evaluate(self, mesh, x, y):
        out = np.full(np.broadcast(x, y).shape, self.default)
        unset = np.ones_like(out, dtype=bool)
        for region, value in self.regions:
            inside = region.contains(x, y) & unset
            out[inside] = value
            unset &= ~inside
        return out


@dataclass(frozen=True)
class MeasureLineAlpha:
    """Lebesgue base density plus a weighted line measure on y = line_y.

    On a mesh of size h the line part is spread over the strip
    ``line_y - 100 h <= y <= line_y`` (clipped to the domain) with density
    ``weight/(100 h)``, so the extra mass per unit line length equals
    ``weight``.
    """

    line_y: float = 0.5
    weight: float = 100.0
    base: float = 1.0

    def __post_init__(self):
        if not self.base > 0.0 or not self.weight > 0.0:
            raise ValueError("line-measure bound needs positive base and weight")

    def strip_bounds(self, mesh: Mesh):
        lo = max(self.line_y - LINE_STRIP_CELLS * mesh.h, mesh.rect.y0)
        return lo, self.line_y

    def evaluate(self, mesh, x, y):
        if mesh is None:
            raise ValueError("line-measure bound needs a mesh to fix the strip width")
        lo, hi = self.strip_bounds(mesh)
        y = np.asarray(y)
        inside = (y >= lo) & (y <= hi)
        density = self.weight / (LINE_STRIP_CELLS * mesh.h)
        return np.where(inside, self.base + density, self.base) * np.ones_like(np.asarray(x), dtype=float)


def alpha_values(spec, mesh, x, y) -> np.ndarray:
    return spec.evaluate(mesh, x, y)


def alpha_at(spec, mesh, point) -> float:
    """Pointwise constraint bound; raises if the configured value is not positive."""
    value = float(np.asarray(spec.evaluate(mesh, point[0], point[1])))
    if not value > 0.0:
        raise ValueError(f"constraint bound must be positive, got {value} at {point}")
    return value


# --- sources ----------------------------------------------------------------

@dataclass(frozen=True)
class ConstantSource:
    value: float

    def evaluate(self, x, y):
        return np.full(np.broadcast(x, y).shape, float(self.value))


@dataclass(frozen=True)
class HalfPlaneSource:
    region: HalfPlane
    inside: float
    outside: float = 0.0

    def evaluate(self, x, y):
        return np.where(self.region.contains(x, y), self.inside, self.outside).astype(float)


def _cone_valley_profile(x, y):
    # piecewise base profile: capped paraboloid, overlaid with a sharp cone
    # above the anti-diagonal
    base = np.minimum(0.2, 0.5 * (x**2 + y**2))
    cone = 1.0 - 5.0 * np.sqrt((x - 0.7) ** 2 + (y - 0.7) ** 2)
    upper = np.maximum(cone, base)
    return np.where(y <= 1.0 - x, base, np.where(1.0 - x < y, upper, 0.0))


_PRESET_SOURCES = {
    "cone_valley": lambda x, y: 1e-3 + _cone_valley_profile(x, y),
}


@dataclass(frozen=True)
class PresetSource:
    name: str

    def __post_init__(self):
        if self.name not in _PRESET_SOURCES:
            raise ValueError(f"unknown source preset {self.name!r}; "
                             f"available: {sorted(_PRESET_SOURCES)}")

    def evaluate(self, x, y):
        return np.asarray(_PRESET_SOURCES[self.name](np.asarray(x, dtype=float),
                                                     np.asarray(y, dtype=float)))


def source_values(spec, x, y) -> np.ndarray:
    return spec.evaluate(x, y)


# --- problem bundle ---------------------------------------------------------

@dataclass(frozen=True)
class ProblemSpec:
    rect: Rect
    nx: int
    ny: int
    boundary: BoundaryPartition
    alpha: object
    source: object

    def __post_init__(self):
        if self.nx < 1 or self.ny < 1:
            raise ValueError(f"grid must be at least 1x1, got {self.nx}x{self.ny}")


# --- the constant-data reference solution -----------------------------------

def exact_solution_ex1(f_const: float, alpha_const: float):
    """Closed-form solution pair on the unit square for constant data.

    The height is u(x, y) = min(m(x), m(y)) with the clipped tent profile
    m(s) = min(f, alpha*s, alpha*(1-s)).  The flux field lives along the
    coordinate axis of the active profile and points downhill; its sign is
    fixed by the discrete divergence-balance oracle (see tests).
    """
    if not (f_const > 0.0 and alpha_const > 0.0):
        raise ValueError("constant data must be positive")
    f, al = float(f_const), float(alpha_const)

    def m(s):
        return np.minimum(f, al * np.minimum(s, 1.0 - s))

    def u(x, y):
        return np.minimum(m(np.asarray(x, dtype=float)), m(np.asarray(y, dtype=float)))

    def p(x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        mx, my = m(x), m(y)
        amp = (f - 0.5 * (mx + my)) / al
        px = (my - mx) * np.sign(x - 0.5) * amp
        py = (mx - my) * np.sign(y - 0.5) * amp
        x_active = np.abs(x - 0.5) > np.abs(y - 0.5)
        zero = np.zeros_like(px)
        return np.stack([np.where(x_active, px, zero),
                         np.where(x_active, zero, py)], axis=-1)

    return u, p


# --- named scenarios ---------------------------------------------------------

_EX1_CONSTANTS = {
    "ex1_f1_a1": (1.0, 1.0),
    "ex1_f025_a1": (0.25, 1.0),
    "ex1_f01_a1": (0.1, 1.0),
    "ex1_f1_a05": (1.0, 0.5),
}

SCENARIOS = (
    "ex1_f1_a1", "ex1_f025_a1", "ex1_f01_a1", "ex1_f1_a05", "ex1_f1_ajump",
    "ex2_a25", "ex2_a15", "ex4_measure",
)


def scenario(name: str, n: int = 64) -> ProblemSpec:
    """Named preset problems on the unit square with zero boundary data."""
    if name in _EX1_CONSTANTS:
        f, al = _EX1_CONSTANTS[name]
        alpha, source = ConstantAlpha(al), ConstantSource(f)
    elif name == "ex1_f1_ajump":
        alpha = PiecewiseAlpha(regions=((HalfPlane(1.0, 1.0, 1.0), 0.75),), default=1.0)
        source = ConstantSource(1.0)
    elif name == "ex2_a25":
        alpha, source = ConstantAlpha(2.5), PresetSource("cone_valley")
    elif name == "ex2_a15":
        alpha, source = ConstantAlpha(1.5), PresetSource("cone_valley")
    elif name == "ex4_measure":
        alpha = MeasureLineAlpha(line_y=0.5, weight=100.0, base=1.0)
        source = HalfPlaneSource(HalfPlane(0.0, -1.0, -0.5), inside=0.25, outside=0.0)
    else:
        raise ValueError(f"unknown scenario {name!r}; available: {SCENARIOS}")
    return ProblemSpec(rect=UNIT_SQUARE, nx=n, ny=n, boundary=ALL_DIRICHLET,
                       alpha=alpha, source=source)


def exact_solution_for(name: str):
    if name not in _EX1_CONSTANTS:
        raise ValueError(f"scenario {name!r} has no closed-form solution")
    return exact_solution_ex1(*_EX1_CONSTANTS[name])


# --- mesh-refinement study ----------------------------------------------------

@dataclass(frozen=True)
class StudyResult:
    mesh_sizes: tuple
    h: tuple
    err_u: tuple
    err_p: tuple
    rate_u: float        # least-squares slope of log err vs log h
    rate_p: float
    step_rates_u: tuple  # pairwise rates, one fewer than meshes
    step_rates_p: tuple


def _fit_rate(h, err):
    if len(h) < 2:
        return float("nan")
    return float(np.polyfit(np.log(h), np.log(err), 1)[0])


def convergence_study(name: str, mesh_sizes, config=None) -> StudyResult:
    """One continuation solve per mesh against the closed-form solution."""
    from . import fem
    from .solver import DiscreteProblem, SolverConfig, continuation_solve

    u_exact, p_exact = exact_solution_for(name)
    config = config or SolverConfig()
    hs, eus, eps = [], [], []
    for n in mesh_sizes:
        spec = scenario(name, n=n)
        dp = DiscreteProblem.from_spec(spec)
        sol, _ = continuation_solve(dp, config)
        hs.append(dp.mesh.h)
        eus.append(fem.l2_error_p0(dp.mesh, sol.u, u_exact, ws=dp.workspace))
        eps.append(fem.l2_error_rt0(dp.mesh, sol.p, p_exact, ws=dp.workspace))

    def steps(errs):
        return tuple(
            math.log(errs[i] / errs[i + 1]) / math.log(hs[i] / hs[i + 1])
            for i in range(len(errs) - 1)
        )

    return StudyResult(
        mesh_sizes=tuple(mesh_sizes), h=tuple(hs),
        err_u=tuple(eus), err_p=tuple(eps),
        rate_u=_fit_rate(hs, eus), rate_p=_fit_rate(hs, eps),
        step_rates_u=steps(eus), step_rates_p=steps(eps),
    )
