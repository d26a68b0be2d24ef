"""Structured triangulations of axis-aligned rectangles.

Every grid cell is split along its lower-left to upper-right diagonal, so an
nx-by-ny grid has 2*nx*ny triangles and nx*(ny+1) + ny*(nx+1) + nx*ny edges.
Each edge carries a fixed global unit normal: the 90-degree clockwise
rotation of the direction from its lower-numbered to its higher-numbered
vertex.  This pins the sign convention for flux degrees of freedom, and the
incidence sign of a triangle on an edge is +1 exactly when the triangle's
counterclockwise traversal runs from the lower to the higher vertex index.

Meshes are immutable after construction; all queries are pure.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

BOUNDARY_SIDES = ("left", "right", "bottom", "top")


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle (x0, y0) to (x1, y1)."""

    x0: float
    y0: float
    x1: float
    y1: float

    def __post_init__(self):
        if not (self.x0 < self.x1 and self.y0 < self.y1):
            raise ValueError(f"degenerate rectangle: {self}")

    @property
    def width(self) -> float:
        return self.x1 - self.x0

    @property
    def height(self) -> float:
        return self.y1 - self.y0


UNIT_SQUARE = Rect(0.0, 0.0, 1.0, 1.0)


@dataclass(frozen=True)
class BoundaryPartition:
    """Splits the rectangle boundary into flux-constrained sides and the rest.

    ``gamma_n_sides`` lists whole sides (subset of left/right/bottom/top) on
    which the normal flux of the vector variable is pinned to zero.  The
    complementary sides carry the zero condition on the scalar variable,
    which is natural in the mixed form and needs no DOF constraint.
    """

    gamma_n_sides: frozenset = frozenset()

    def __post_init__(self):
        sides = frozenset(self.gamma_n_sides)
        unknown = sides - set(BOUNDARY_SIDES)
        if unknown:
            raise ValueError(f"unknown boundary sides: {sorted(unknown)}")
        object.__setattr__(self, "gamma_n_sides", sides)

    @property
    def gamma_d_sides(self) -> frozenset:
        return frozenset(BOUNDARY_SIDES) - self.gamma_n_sides


ALL_DIRICHLET = BoundaryPartition(frozenset())
ALL_NEUMANN = BoundaryPartition(frozenset(BOUNDARY_SIDES))


@dataclass(frozen=True)
class Mesh:
    """Structured triangulation with oriented edges.

    vertices        (nv, 2) coordinates, row-major in (i, j) with j outer
    triangles       (nt, 3) vertex ids, counterclockwise
    edges           (ne, 2) vertex ids, lower index first
    edge_normals    (ne, 2) global unit normals
    edge_lengths    (ne,)
    tri_edges       (nt, 3) edge ids; local slot k joins vertices k, k+1
    tri_edge_signs  (nt, 3) +1/-1 incidence signs
    boundary_edges  side name -> edge ids
    """

    rect: Rect
    nx: int
    ny: int
    vertices: np.ndarray
    triangles: np.ndarray
    edges: np.ndarray
    edge_normals: np.ndarray
    edge_lengths: np.ndarray
    tri_edges: np.ndarray
    tri_edge_signs: np.ndarray
    boundary_edges: dict = field(repr=False)

    @property
    def num_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def num_triangles(self) -> int:
        return self.triangles.shape[0]

    @property
    def num_edges(self) -> int:
        return self.edges.shape[0]

    @property
    def dx(self) -> float:
        return self.rect.width / self.nx

    @property
    def dy(self) -> float:
        return self.rect.height / self.ny

    @property
    def h(self) -> float:
        """Mesh size used by mesh-dependent data: the smaller cell side."""
        return min(self.dx, self.dy)

    def boundary_edge_ids(self) -> np.ndarray:
        return np.concatenate([self.boundary_edges[s] for s in BOUNDARY_SIDES])

    def locate_triangle(self, x, y) -> np.ndarray:
        """Triangle ids containing the given points (vectorized).

        Points on a shared edge go to the cell/triangle whose closed region
        is checked first; for field evaluation either choice agrees.
        """
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        xi = (x - self.rect.x0) / self.dx
        yj = (y - self.rect.y0) / self.dy
        i = np.clip(np.floor(xi).astype(int), 0, self.nx - 1)
        j = np.clip(np.floor(yj).astype(int), 0, self.ny - 1)
        # below the cell diagonal -> lower triangle
        lower = (xi - i) >= (yj - j)
        return 2 * (j * self.nx + i) + np.where(lower, 0, 1)


def build_rect_mesh(rect: Rect, nx: int, ny: int) -> Mesh:
    """Triangulate ``rect`` on an nx-by-ny grid with deterministic numbering.

    Vertices are numbered row-major, edges in three blocks (horizontal,
    vertical, diagonal, each row-major), triangles cell by cell with the
    lower triangle first.
    """
    if nx < 1 or ny < 1:
        raise ValueError(f"grid must have at least one cell per direction, got {nx}x{ny}")
    nvx, nvy = nx + 1, ny + 1
    dx = rect.width / nx
    dy = rect.height / ny

    xs = rect.x0 + dx * np.arange(nvx)
    ys = rect.y0 + dy * np.arange(nvy)
    gx, gy = np.meshgrid(xs, ys)  # row-major: index j*nvx + i
    vertices = np.column_stack([gx.ravel(), gy.ravel()])

    def vid(i, j):
        return j * nvx + i

    # edge blocks: horizontal, then vertical, then diagonal
    n_h = nx * nvy
    n_v = ny * nvx
    n_d = nx * ny

    ih, jh = np.meshgrid(np.arange(nx), np.arange(nvy))
    h_a = vid(ih.ravel(), jh.ravel())
    iv, jv = np.meshgrid(np.arange(nvx), np.arange(ny))
    v_a = vid(iv.ravel(), jv.ravel())
    idg, jdg = np.meshgrid(np.arange(nx), np.arange(ny))
    d_a = vid(idg.ravel(), jdg.ravel())

    edges = np.empty((n_h + n_v + n_d, 2), dtype=int)
    edges[:n_h, 0] = h_a
    edges[:n_h, 1] = h_a + 1
    edges[n_h:n_h + n_v, 0] = v_a
    edges[n_h:n_h + n_v, 1] = v_a + nvx
    edges[n_h + n_v:, 0] = d_a
    edges[n_h + n_v:, 1] = d_a + nvx + 1

    diag_len = float(np.hypot(dx, dy))
    edge_lengths = np.concatenate([
        np.full(n_h, dx),
        np.full(n_v, dy),
        np.full(n_d, diag_len),
    ])
    # normal = clockwise rotation of the lower-to-higher vertex direction
    edge_normals = np.concatenate([
        np.tile([0.0, -1.0], (n_h, 1)),
        np.tile([1.0, 0.0], (n_v, 1)),
        np.tile([dy / diag_len, -dx / diag_len], (n_d, 1)),
    ])

    def h_id(i, j):
        return j * nx + i

    def v_id(i, j):
        return n_h + j * nvx + i

    def d_id(i, j):
        return n_h + n_v + j * nx + i

    ic, jc = np.meshgrid(np.arange(nx), np.arange(ny))
    ic, jc = ic.ravel(), jc.ravel()
    a = vid(ic, jc)
    nt = 2 * nx * ny
    triangles = np.empty((nt, 3), dtype=int)
    tri_edges = np.empty((nt, 3), dtype=int)
    tri_edge_signs = np.empty((nt, 3), dtype=np.int8)

    # lower triangle (a, a+1, a+nvx+1): edges run a->b, b->c, c->a
    triangles[0::2, 0] = a
    triangles[0::2, 1] = a + 1
    triangles[0::2, 2] = a + nvx + 1
    tri_edges[0::2, 0] = h_id(ic, jc)
    tri_edges[0::2, 1] = v_id(ic + 1, jc)
    tri_edges[0::2, 2] = d_id(ic, jc)
    tri_edge_signs[0::2] = (1, 1, -1)

    # upper triangle (a, a+nvx+1, a+nvx)
    triangles[1::2, 0] = a
    triangles[1::2, 1] = a + nvx + 1
    triangles[1::2, 2] = a + nvx
    tri_edges[1::2, 0] = d_id(ic, jc)
    tri_edges[1::2, 1] = h_id(ic, jc + 1)
    tri_edges[1::2, 2] = v_id(ic, jc)
    tri_edge_signs[1::2] = (1, -1, -1)

    boundary_edges = {
        "bottom": h_id(np.arange(nx), 0),
        "top": h_id(np.arange(nx), ny),
        "left": v_id(0, np.arange(ny)),
        "right": v_id(nx, np.arange(ny)),
    }

    for arr in (vertices, triangles, edges, edge_normals, edge_lengths,
                tri_edges, tri_edge_signs):
        arr.setflags(write=False)

    return Mesh(
        rect=rect, nx=nx, ny=ny,
        vertices=vertices, triangles=triangles,
        edges=edges, edge_normals=edge_normals, edge_lengths=edge_lengths,
        tri_edges=tri_edges, tri_edge_signs=tri_edge_signs,
        boundary_edges=boundary_edges,
    )


def classify_boundary(mesh: Mesh, bp: BoundaryPartition):
    """Split boundary edges into (dirichlet_edge_ids, neumann_edge_ids)."""
    dirichlet, neumann = [], []
    for side in BOUNDARY_SIDES:
        ids = mesh.boundary_edges[side]
        (neumann if side in bp.gamma_n_sides else dirichlet).append(ids)
    cat = lambda parts: np.sort(np.concatenate(parts)) if parts else np.empty(0, dtype=int)
    return cat(dirichlet), cat(neumann)


@dataclass(frozen=True)
class ElementGeometry:
    area: float
    centroid: np.ndarray
    edge_lengths: np.ndarray       # per local edge slot
    outward_normals: np.ndarray    # (3, 2), unit


def element_geometry(mesh: Mesh, tri_id: int) -> ElementGeometry:
    """Area, centroid, edge lengths and outward unit normals of a triangle."""
    coords = mesh.vertices[mesh.triangles[tri_id]]
    e = np.roll(coords, -1, axis=0) - coords  # slot k joins vertices k, k+1
    area = 0.5 * float(e[0, 0] * (-e[2, 1]) - e[0, 1] * (-e[2, 0]))
    lengths = np.linalg.norm(e, axis=1)
    normals = np.column_stack([e[:, 1], -e[:, 0]]) / lengths[:, None]
    return ElementGeometry(
        area=area,
        centroid=coords.mean(axis=0),
        edge_lengths=lengths,
        outward_normals=normals,
    )
