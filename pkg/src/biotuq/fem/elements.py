"""P2 (displacement) / P1 (pressure) Lagrange elements on triangles.

Local P2 node order: the three vertices, then the midpoints of the edges
opposite vertex 0, 1, 2. Displacement DOFs are blocked by component:
``[u1 at all P2 nodes, u2 at all P2 nodes]``. Pressure DOFs are the mesh
vertices.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import TriMesh

# Radon's 7-point rule, exact for degree 5; barycentric points, weights sum to 1
_a1, _b1 = (6 - np.sqrt(15)) / 21, (9 + 2 * np.sqrt(15)) / 21
_a2, _b2 = (6 + np.sqrt(15)) / 21, (9 - 2 * np.sqrt(15)) / 21
_w1, _w2 = (155 - np.sqrt(15)) / 1200, (155 + np.sqrt(15)) / 1200
QUAD7_POINTS = np.array([
    [1 / 3, 1 / 3, 1 / 3],
    [_a1, _a1, _b1], [_a1, _b1, _a1], [_b1, _a1, _a1],
    [_a2, _a2, _b2], [_a2, _b2, _a2], [_b2, _a2, _a2],
])
QUAD7_WEIGHTS = np.array([9 / 40, _w1, _w1, _w1, _w2, _w2, _w2])

# 3-point Gauss-Legendre on [0, 1], exact for degree 5
GAUSS3_S = 0.5 + 0.5 * np.array([-np.sqrt(3 / 5), 0.0, np.sqrt(3 / 5)])
GAUSS3_W = np.array([5 / 18, 8 / 18, 5 / 18])

_EDGE_OPP = np.array([[1, 2], [2, 0], [0, 1]])


def p1_values(lam: np.ndarray) -> np.ndarray:
    return np.asarray(lam, dtype=float)


def p2_values(lam: np.ndarray) -> np.ndarray:
    """P2 shape functions at barycentric points ``lam`` (..., 3) -> (..., 6)."""
    lam = np.asarray(lam, dtype=float)
    vert = lam * (2 * lam - 1)
    edge = 4 * lam[..., _EDGE_OPP[:, 0]] * lam[..., _EDGE_OPP[:, 1]]
    return np.concatenate([vert, edge], axis=-1)


def p2_bary_gradients(lam: np.ndarray) -> np.ndarray:
    """Derivatives of the P2 shape functions w.r.t. the barycentrics: (..., 6, 3)."""
    lam = np.asarray(lam, dtype=float)
    out = np.zeros(lam.shape[:-1] + (6, 3))
    for i in range(3):
        out[..., i, i] = 4 * lam[..., i] - 1
    for e, (j, k) in enumerate(_EDGE_OPP):
        out[..., 3 + e, j] = 4 * lam[..., k]
        out[..., 3 + e, k] = 4 * lam[..., j]
    return out


def edge_p2_values(s: np.ndarray) -> np.ndarray:
    """P2 trace on an edge parametrized by s in [0, 1]: (start, mid, end)."""
    s = np.asarray(s, dtype=float)
    return np.stack([(1 - s) * (1 - 2 * s), 4 * s * (1 - s), s * (2 * s - 1)], axis=-1)


def barycentric_gradients(mesh: TriMesh) -> np.ndarray:
    """Constant gradients of the barycentric coordinates, shape (nt, 3, 2)."""
    p = mesh.vertices[mesh.triangles]
    x, y = p[..., 0], p[..., 1]
    twice_area = 2 * mesh.areas()
    g = np.empty(p.shape)
    for i, (j, k) in enumerate(_EDGE_OPP):
        g[:, i, 0] = (y[:, j] - y[:, k]) / twice_area
        g[:, i, 1] = (x[:, k] - x[:, j]) / twice_area
    return g


@dataclass(eq=False)
class DofMap:
    mesh: TriMesh
    p2_nodes: np.ndarray   # (nn, 2) coordinates
    tri_p2: np.ndarray     # (nt, 6) node ids

    @classmethod
    def build(cls, mesh: TriMesh) -> "DofMap":
        edges = mesh.edges
        mids = 0.5 * (mesh.vertices[edges[:, 0]] + mesh.vertices[edges[:, 1]])
        nodes = np.vstack([mesh.vertices, mids])
        tri_p2 = np.hstack([mesh.triangles, mesh.n_vertices + mesh.triangle_edges])
        return cls(mesh, nodes, tri_p2)

    @property
    def n_nodes(self) -> int:
        return len(self.p2_nodes)

    @property
    def n_u(self) -> int:
        return 2 * self.n_nodes

    @property
    def n_p(self) -> int:
        return self.mesh.n_vertices

    def u_dofs(self, component: int, nodes) -> np.ndarray:
        return component * self.n_nodes + np.asarray(nodes, dtype=np.intp)

    def edge_midpoint_nodes(self, edges: np.ndarray) -> np.ndarray:
        """P2 node ids of the midpoints of the given vertex-pair edges."""
        lookup = {tuple(e): i for i, e in enumerate(self.mesh.edges.tolist())}
        return np.array([self.mesh.n_vertices + lookup[tuple(sorted(e))] for e in edges.tolist()],
                        dtype=np.intp)

    def p2_nodes_on(self, tags) -> np.ndarray:
        edges = self.mesh.edges_with_tag(tags)
        if len(edges) == 0:
            return np.zeros(0, dtype=np.intp)
        return np.unique(np.concatenate([edges.ravel(), self.edge_midpoint_nodes(edges)]))

    def quadrature_points(self, points=QUAD7_POINTS) -> np.ndarray:
        """Physical coordinates of barycentric points on every triangle: (nt, nq, 2)."""
        p = self.mesh.vertices[self.mesh.triangles]
        return np.einsum("qi,tid->tqd", points, p)

    def eval_p2(self, values: np.ndarray, points=QUAD7_POINTS) -> np.ndarray:
        """Interpolate a P2 nodal field at quadrature points: (nt, nq)."""
        return np.einsum("qa,ta->tq", p2_values(points), values[self.tri_p2])

    def eval_p1(self, values: np.ndarray, points=QUAD7_POINTS) -> np.ndarray:
        return np.einsum("qa,ta->tq", points, values[self.mesh.triangles])
