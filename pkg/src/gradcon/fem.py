"""Lowest-order Raviart-Thomas / piecewise-constant finite elements.

Vector fields are expanded in the RT0 basis with one degree of freedom per
edge, normalized as the signed total flux across the edge in the direction
of the global edge normal.  With that normalization the local basis on a
triangle is

    psi_k(x) = sign_k * (x - v_opp) / (2 |T|),

where v_opp is the vertex opposite local edge k, and the divergence pairing
matrix B has entries +-1.  Scalar fields are piecewise constant, one value
per triangle.

Area integrals use a 6-point rule on the reference triangle that is exact
for polynomials of total degree <= 4; the non-polynomial smoothed-norm
integrands are evaluated with the same rule.  Edge integrals (RT0
interpolation) use 3-point Gauss.

Assembly is pure given an immutable mesh.  The per-mesh basis tables live
in a :class:`Workspace`; ops accept one optionally and build their own when
omitted.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import huber
from .mesh import Mesh


@dataclass(frozen=True)
class QuadratureRule:
    """Barycentric points and weights; weights sum to 1."""

    points: np.ndarray   # (nq, 3)
    weights: np.ndarray  # (nq,)


def _degree4_rule() -> QuadratureRule:
    a1, w1 = 0.816847572980459, 0.109951743655322
    b1 = (1.0 - a1) / 2.0
    a2, w2 = 0.108103018168070, 0.223381589678011
    b2 = (1.0 - a2) / 2.0
    pts, wts = [], []
    for a, b, w in ((a1, b1, w1), (a2, b2, w2)):
        pts += [(a, b, b), (b, a, b), (b, b, a)]
        wts += [w, w, w]
    return QuadratureRule(points=np.array(pts), weights=np.array(wts))


TRI_QUADRATURE = _degree4_rule()

# 3-point Gauss-Legendre on [-1, 1]
_EDGE_NODES = np.array([-np.sqrt(0.6), 0.0, np.sqrt(0.6)])
_EDGE_WEIGHTS = np.array([5.0, 8.0, 5.0]) / 9.0


@dataclass(frozen=True)
class Workspace:
    """Per-mesh basis tables shared by the assembly routines."""

    mesh: Mesh
    rule: QuadratureRule
    areas: np.ndarray          # (nt,)
    centroids: np.ndarray      # (nt, 2)
    qpoints: np.ndarray        # (nt, nq, 2)
    psi: np.ndarray            # (nt, 3, nq, 2) signed RT0 basis at qpoints
    psi_centroid: np.ndarray   # (nt, 3, 2)


def build_workspace(mesh: Mesh, rule: QuadratureRule = TRI_QUADRATURE) -> Workspace:
    coords = mesh.vertices[mesh.triangles]          # (nt, 3, 2)
    e01 = coords[:, 1] - coords[:, 0]
    e02 = coords[:, 2] - coords[:, 0]
    areas = 0.5 * (e01[:, 0] * e02[:, 1] - e01[:, 1] * e02[:, 0])
    centroids = coords.mean(axis=1)
    qpoints = np.einsum("qk,tkd->tqd", rule.points, coords)
    # local edge slot k joins vertices k, k+1; opposite vertex is k+2
    opp = coords[:, [2, 0, 1], :]                   # (nt, 3, 2)
    scale = (mesh.tri_edge_signs / (2.0 * areas)[:, None])[:, :, None, None]
    psi = scale * (qpoints[:, None, :, :] - opp[:, :, None, :])
    psi_c = scale[:, :, 0, :] * (centroids[:, None, :] - opp)
    return Workspace(mesh=mesh, rule=rule, areas=areas, centroids=centroids,
                     qpoints=qpoints, psi=psi, psi_centroid=psi_c)


def _workspace(mesh: Mesh, ws: Workspace | None) -> Workspace:
    if ws is not None:
        if ws.mesh is not mesh:
            raise ValueError("workspace belongs to a different mesh")
        return ws
    return build_workspace(mesh)


def _scalar_at_quadrature(mesh: Mesh, f, ws: Workspace) -> np.ndarray:
    """Values of a scalar field at all quadrature points, shape (nt, nq)."""
    if callable(f):
        vals = np.asarray(f(ws.qpoints[..., 0], ws.qpoints[..., 1]), dtype=float)
        return np.broadcast_to(vals, ws.qpoints.shape[:2])
    vals = np.asarray(f, dtype=float)
    if vals.shape != ws.qpoints.shape[:2]:
        raise ValueError(f"expected values of shape {ws.qpoints.shape[:2]}, got {vals.shape}")
    return vals


def assemble_div(mesh: Mesh) -> sp.csr_matrix:
    """Divergence pairing B, shape (nt, ne): B[T, e] = incidence sign."""
    nt = mesh.num_triangles
    rows = np.repeat(np.arange(nt), 3)
    cols = mesh.tri_edges.ravel()
    vals = mesh.tri_edge_signs.ravel().astype(float)
    return sp.coo_matrix((vals, (rows, cols)), shape=(nt, mesh.num_edges)).tocsr()


def assemble_mass_p0(mesh: Mesh, ws: Workspace | None = None) -> np.ndarray:
    """Diagonal of the P0 mass matrix: the triangle areas."""
    return _workspace(mesh, ws).areas.copy()


def assemble_load(mesh: Mesh, f, ws: Workspace | None = None) -> np.ndarray:
    """Cell integrals of a scalar source, entry_T = integral of f over T."""
    ws = _workspace(mesh, ws)
    fq = _scalar_at_quadrature(mesh, f, ws)
    return ws.areas * (fq @ ws.rule.weights)


def project_p0(mesh: Mesh, f, ws: Workspace | None = None) -> np.ndarray:
    """Cell means of a scalar field."""
    ws = _workspace(mesh, ws)
    return _scalar_at_quadrature(mesh, f, ws) @ ws.rule.weights


def interpolate_rt0(mesh: Mesh, field) -> np.ndarray:
    """Edge-flux interpolation: DOF_e = integral over e of field . n_e.

    ``field(x, y)`` must return an array of shape (..., 2).  Edge integrals
    use 3-point Gauss, exact for traces of polynomial degree <= 5.
    """
    a = mesh.vertices[mesh.edges[:, 0]]
    b = mesh.vertices[mesh.edges[:, 1]]
    mid = 0.5 * (a + b)
    half = 0.5 * (b - a)
    dofs = np.zeros(mesh.num_edges)
    for s, w in zip(_EDGE_NODES, _EDGE_WEIGHTS):
        pts = mid + s * half
        vals = np.asarray(field(pts[:, 0], pts[:, 1]), dtype=float)
        dofs += 0.5 * w * np.einsum("ed,ed->e", vals, mesh.edge_normals)
    return dofs * mesh.edge_lengths


def rt0_at_quadrature(ws: Workspace, p: np.ndarray) -> np.ndarray:
    """RT0 field values at all quadrature points, shape (nt, nq, 2)."""
    coeffs = p[ws.mesh.tri_edges]  # (nt, 3)
    return np.einsum("tk,tkqd->tqd", coeffs, ws.psi)


def rt0_at_centroids(ws: Workspace, p: np.ndarray) -> np.ndarray:
    coeffs = p[ws.mesh.tri_edges]
    return np.einsum("tk,tkd->td", coeffs, ws.psi_centroid)


def rt0_eval(mesh: Mesh, p: np.ndarray, tri_id: int, point) -> np.ndarray:
    """Value of an RT0 field at a point inside triangle ``tri_id``."""
    coords = mesh.vertices[mesh.triangles[tri_id]]
    point = np.asarray(point, dtype=float)
    T = np.column_stack([coords[1] - coords[0], coords[2] - coords[0]])
    lam12 = np.linalg.solve(T, point - coords[0])
    lam = np.array([1.0 - lam12.sum(), *lam12])
    if np.any(lam < -1e-12):
        raise ValueError(f"point {point} lies outside triangle {tri_id}")
    area = 0.5 * abs(np.linalg.det(T))
    value = np.zeros(2)
    for k in range(3):
        opp = coords[(k + 2) % 3]
        sign = mesh.tri_edge_signs[tri_id, k]
        value += p[mesh.tri_edges[tri_id, k]] * sign * (point - opp) / (2.0 * area)
    return value


def assemble_huber_residual(mesh: Mesh, p: np.ndarray, alpha, tau: float,
                            ws: Workspace | None = None,
                            neumann_edges: np.ndarray | None = None) -> np.ndarray:
    """Edge vector of integrals alpha * dphi(p_h) . psi_e over the mesh."""
    ws = _workspace(mesh, ws)
    aq = _scalar_at_quadrature(mesh, alpha, ws)
    g = huber.dphi(rt0_at_quadrature(ws, p), tau)
    elem = np.einsum("q,tq,tqd,tkqd->tk", ws.rule.weights, aq, g, ws.psi,
                     optimize=True) * ws.areas[:, None]
    out = np.zeros(mesh.num_edges)
    np.add.at(out, mesh.tri_edges, elem)
    if neumann_edges is not None and len(neumann_edges):
        out[neumann_edges] = 0.0
    return out


def assemble_huber_jacobian(mesh: Mesh, p: np.ndarray, alpha, tau: float,
                            ws: Workspace | None = None) -> sp.csr_matrix:
    """Sparse symmetric PSD matrix of integrals alpha * psi_e^T d2phi(p_h) psi_f."""
    ws = _workspace(mesh, ws)
    aq = _scalar_at_quadrature(mesh, alpha, ws)
    pq = rt0_at_quadrature(ws, p)
    r = np.linalg.norm(pq, axis=-1)
    quad = r <= tau
    safe_r = np.where(quad, 1.0, r)
    iso = np.where(quad, 1.0 / tau, 1.0 / safe_r)
    rank1 = np.where(quad, 0.0, 1.0 / safe_r**3)

    w = ws.rule.weights
    blocks = np.einsum("q,tq,tq,tkqd,tlqd->tkl", w, aq, iso, ws.psi, ws.psi,
                       optimize=True)
    pk = np.einsum("tkqd,tqd->tkq", ws.psi, pq, optimize=True)
    blocks -= np.einsum("q,tq,tq,tkq,tlq->tkl", w, aq, rank1, pk, pk,
                        optimize=True)
    blocks *= ws.areas[:, None, None]

    rows = np.broadcast_to(mesh.tri_edges[:, :, None], blocks.shape).ravel()
    cols = np.broadcast_to(mesh.tri_edges[:, None, :], blocks.shape).ravel()
    ne = mesh.num_edges
    return sp.coo_matrix((blocks.ravel(), (rows, cols)), shape=(ne, ne)).tocsr()


def l2_error_p0(mesh: Mesh, u: np.ndarray, exact, ws: Workspace | None = None) -> float:
    """L2 distance between a P0 field and a scalar callback."""
    ws = _workspace(mesh, ws)
    diff = u[:, None] - _scalar_at_quadrature(mesh, exact, ws)
    return float(np.sqrt(np.einsum("q,tq,t->", ws.rule.weights, diff**2, ws.areas)))


def l2_error_rt0(mesh: Mesh, p: np.ndarray, exact, ws: Workspace | None = None) -> float:
    """L2 distance between an RT0 field and a vector callback."""
    ws = _workspace(mesh, ws)
    vals = np.asarray(exact(ws.qpoints[..., 0], ws.qpoints[..., 1]), dtype=float)
    diff = rt0_at_quadrature(ws, p) - vals
    sq = np.einsum("tqd,tqd->tq", diff, diff)
    return float(np.sqrt(np.einsum("q,tq,t->", ws.rule.weights, sq, ws.areas)))
