"""Sparse assembly of the Biot bilinear forms and load vectors.

Single-sample forms with constant coefficients::

    a(v, w) = int 2 mu eps(v):eps(w) + lambda div v div w
    b(v, q) = -int alpha div v q
    c(p, q) = int c0 p q
    d(p, q) = int kappa grad p . grad q

``B[i, j] = b(phi_j, L_i)`` so the momentum rows read ``A u + B^T p`` and the
fluid rows read ``C p - B u``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .elements import (GAUSS3_S, GAUSS3_W, QUAD7_POINTS, QUAD7_WEIGHTS, DofMap,
                       barycentric_gradients, edge_p2_values, p2_bary_gradients, p2_values)
from .mesh import MeshError, TriMesh


@dataclass(eq=False)
class AssembledSystem:
    dofmap: DofMap
    A: sp.csr_matrix
    B: sp.csr_matrix
    C: sp.csr_matrix
    D: sp.csr_matrix
    mass_u: sp.csr_matrix   # scalar P2 mass matrix, one displacement component
    mass_p: sp.csr_matrix   # P1 mass matrix

    @property
    def n_u(self) -> int:
        return self.dofmap.n_u

    @property
    def n_p(self) -> int:
        return self.dofmap.n_p


def _scatter(rows: np.ndarray, cols: np.ndarray, vals: np.ndarray, shape) -> sp.csr_matrix:
    r = np.broadcast_to(rows[:, :, None], vals.shape).ravel()
    c = np.broadcast_to(cols[:, None, :], vals.shape).ravel()
    return sp.coo_matrix((vals.ravel(), (r, c)), shape=shape).tocsr()


def p2_gradients(dofmap: DofMap, points=QUAD7_POINTS) -> np.ndarray:
    """Physical gradients of the six P2 shape functions: (nt, nq, 6, 2)."""
    glam = barycentric_gradients(dofmap.mesh)            # (nt, 3, 2)
    dN = p2_bary_gradients(points)                       # (nq, 6, 3)
    return np.einsum("qab,tbd->tqad", dN, glam)


def elasticity_blocks(grads: np.ndarray, wts: np.ndarray, mu: float, lam: float):
    """Element blocks (A11, A12, A22) of shape (nt, 6, 6)."""
    S = np.einsum("tq,tqad,tqbe->tabde", wts, grads, grads)
    sxx, sxy, syx, syy = S[..., 0, 0], S[..., 0, 1], S[..., 1, 0], S[..., 1, 1]
    a11 = (2 * mu + lam) * sxx + mu * syy
    a22 = (2 * mu + lam) * syy + mu * sxx
    a12 = lam * sxy + mu * syx
    return a11, a12, a22


def element_stiffness(vertices, mu: float, lam: float) -> np.ndarray:
    """12x12 elasticity matrix of one triangle, DOFs ordered (u1 nodes, u2 nodes)."""
    mesh = TriMesh(np.asarray(vertices, float), [[0, 1, 2]], [[0, 1], [1, 2], [2, 0]], ["b"] * 3)
    dm = DofMap.build(mesh)
    grads = p2_gradients(dm)
    wts = QUAD7_WEIGHTS[None, :] * mesh.areas()[:, None]
    a11, a12, a22 = elasticity_blocks(grads, wts, mu, lam)
    return np.block([[a11[0], a12[0]], [a12[0].T, a22[0]]])


def assemble(mesh: TriMesh, mu: float, lam: float, alpha: float, c0: float, kappa: float,
             dofmap: DofMap | None = None) -> AssembledSystem:
    dm = dofmap or DofMap.build(mesh)
    nn, nv = dm.n_nodes, dm.n_p
    areas = mesh.areas()
    if np.any(areas <= 0):
        raise MeshError("degenerate triangle")
    wts = QUAD7_WEIGHTS[None, :] * areas[:, None]        # (nt, nq)
    grads = p2_gradients(dm)                             # (nt, nq, 6, 2)
    N2 = p2_values(QUAD7_POINTS)                         # (nq, 6)
    L = QUAD7_POINTS                                     # P1 values (nq, 3)
    glam = barycentric_gradients(mesh)                   # (nt, 3, 2)
    t2, t1 = dm.tri_p2, mesh.triangles

    a11, a12, a22 = elasticity_blocks(grads, wts, mu, lam)
    A = (_scatter(t2, t2, a11, (2 * nn, 2 * nn))
         + _scatter(t2, t2 + nn, a12, (2 * nn, 2 * nn))
         + _scatter(t2 + nn, t2, np.swapaxes(a12, 1, 2), (2 * nn, 2 * nn))
         + _scatter(t2 + nn, t2 + nn, a22, (2 * nn, 2 * nn)))

    # coupling: B[i, (c, a)] = -alpha int d_c N_a L_i
    bc = -alpha * np.einsum("tq,qi,tqac->tcia", wts, L, grads)
    B = (_scatter(t1, t2, bc[:, 0], (nv, 2 * nn))
         + _scatter(t1, t2 + nn, bc[:, 1], (nv, 2 * nn)))

    mp = np.einsum("tq,qi,qj->tij", wts, L, L)
    Mp = _scatter(t1, t1, mp, (nv, nv))
    C = c0 * Mp
    dk = kappa * np.einsum("t,tid,tjd->tij", areas, glam, glam)
    D = _scatter(t1, t1, dk, (nv, nv))
    mu_ = np.einsum("tq,qa,qb->tab", wts, N2, N2)
    Mu = _scatter(t2, t2, mu_, (nn, nn))
    return AssembledSystem(dm, A, B, sp.csr_matrix(C), D, Mu, Mp)


# load vectors ------------------------------------------------------------

def body_force_load(dm: DofMap, force: Callable, t: float) -> np.ndarray:
    """``int f . v`` for a callable ``force(x, y, t) -> (fx, fy)``."""
    wts = QUAD7_WEIGHTS[None, :] * dm.mesh.areas()[:, None]
    xq = dm.quadrature_points()
    fx, fy = force(xq[..., 0], xq[..., 1], t)
    N2 = p2_values(QUAD7_POINTS)
    out = np.zeros(dm.n_u)
    for comp, f in enumerate((fx, fy)):
        f = np.broadcast_to(np.asarray(f, float), wts.shape)
        loc = np.einsum("tq,tq,qa->ta", wts, f, N2)
        np.add.at(out, comp * dm.n_nodes + dm.tri_p2, loc)
    return out


def scalar_load(dm: DofMap, source: Callable, t: float) -> np.ndarray:
    """``int g q`` over the pressure space for ``source(x, y, t)``."""
    wts = QUAD7_WEIGHTS[None, :] * dm.mesh.areas()[:, None]
    xq = dm.quadrature_points()
    g = np.broadcast_to(np.asarray(source(xq[..., 0], xq[..., 1], t), float), wts.shape)
    loc = np.einsum("tq,tq,qi->ti", wts, g, QUAD7_POINTS)
    out = np.zeros(dm.n_p)
    np.add.at(out, dm.mesh.triangles, loc)
    return out


def point_source_load(mesh: TriMesh, x0, magnitude: float) -> np.ndarray:
    """Dirac source: ``magnitude * q(x0)`` for every P1 test function ``q``."""
    tri, lam = mesh.locate(x0)
    out = np.zeros(mesh.n_vertices)
    for v, l in zip(mesh.triangles[tri], lam):
        if l != 0.0:
            out[v] += magnitude * l
    return out


def traction_load(dm: DofMap, tags, traction, t: float = 0.0) -> np.ndarray:
    """``int_edges t . v`` over the tagged boundary edges.

    ``traction`` is a constant 2-vector or a callable ``(x, y, t) -> (tx, ty)``.
    Three-point Gauss per edge, exact for tractions up to cubic.
    """
    mesh = dm.mesh
    edges = mesh.edges_with_tag(tags)
    out = np.zeros(dm.n_u)
    if len(edges) == 0:
        return out
    mids = dm.edge_midpoint_nodes(edges)
    p0, p1 = mesh.vertices[edges[:, 0]], mesh.vertices[edges[:, 1]]
    length = np.linalg.norm(p1 - p0, axis=1)
    xq = p0[:, None, :] + GAUSS3_S[None, :, None] * (p1 - p0)[:, None, :]   # (ne, 3, 2)
    if callable(traction):
        tx, ty = traction(xq[..., 0], xq[..., 1], t)
    else:
        tx, ty = traction
    Nq = edge_p2_values(GAUSS3_S)                                          # (3 pts, 3 nodes)
    nodes = np.column_stack([edges[:, 0], mids, edges[:, 1]])
    for comp, tr in enumerate((tx, ty)):
        tr = np.broadcast_to(np.asarray(tr, float), xq.shape[:2])
        loc = np.einsum("e,q,eq,qa->ea", length, GAUSS3_W, tr, Nq)
        np.add.at(out, comp * dm.n_nodes + nodes, loc)
    return out
