"""Triangle meshes with tagged boundary edges.

Plain-text mesh format (``#`` starts a comment, blank lines ignored)::

    <vertex count>
    x y                 # one line per vertex
    <triangle count>
    i j k               # zero-based vertex ids
    <boundary edge count>
    i j tag             # tag is a single word

Every boundary edge of the triangulation must be listed exactly once.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Sequence

import numpy as np


class MeshError(ValueError):
    pass


@dataclass(eq=False)
class TriMesh:
    vertices: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    boundary_tags: np.ndarray

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=float).reshape(-1, 2)
        self.triangles = np.asarray(self.triangles, dtype=np.intp).reshape(-1, 3)
        self.boundary_edges = np.asarray(self.boundary_edges, dtype=np.intp).reshape(-1, 2)
        self.boundary_tags = np.asarray(self.boundary_tags, dtype=object)
        self.validate()

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    def areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    @cached_property
    def _edge_data(self):
        # local edge i is opposite local vertex i
        loc = np.array([[1, 2], [2, 0], [0, 1]])
        all_e = np.sort(self.triangles[:, loc].reshape(-1, 2), axis=1)
        edges, inv, counts = np.unique(all_e, axis=0, return_inverse=True, return_counts=True)
        return edges, inv.reshape(-1, 3), counts

    @property
    def edges(self) -> np.ndarray:
        return self._edge_data[0]

    @property
    def triangle_edges(self) -> np.ndarray:
        return self._edge_data[1]

    def validate(self) -> None:
        if self.triangles.size and (self.triangles.min() < 0 or self.triangles.max() >= self.n_vertices):
            raise MeshError("triangle references a missing vertex")
        bad = np.flatnonzero(self.areas() <= 0)
        if bad.size:
            raise MeshError(f"triangle {bad[0]} is degenerate or negatively oriented")
        edges, _, counts = self._edge_data
        if np.any(counts > 2):
            raise MeshError("an edge is shared by more than two triangles")
        topo = {tuple(e) for e in edges[counts == 1]}
        listed = [tuple(sorted(e)) for e in self.boundary_edges.tolist()]
        if len(set(listed)) != len(listed):
            raise MeshError("a boundary edge is tagged more than once")
        if set(listed) != topo:
            missing = topo - set(listed)
            extra = set(listed) - topo
            raise MeshError(
                f"boundary tags do not match the triangulation: {len(missing)} untagged, "
                f"{len(extra)} tagged edges not on the boundary"
            )
        if len(self.boundary_tags) != len(self.boundary_edges):
            raise MeshError("one tag per boundary edge required")

    def tags(self) -> list[str]:
        return sorted(set(self.boundary_tags.tolist()))

    def edges_with_tag(self, tags) -> np.ndarray:
        if isinstance(tags, str):
            tags = [tags]
        mask = np.isin(self.boundary_tags, list(tags))
        return self.boundary_edges[mask]

    def vertices_with_tag(self, tags) -> np.ndarray:
        return np.unique(self.edges_with_tag(tags))

    def locate(self, x0) -> tuple[int, np.ndarray]:
        """Containing triangle (lowest index on ties) and barycentric coordinates."""
        x0 = np.asarray(x0, dtype=float)
        p = self.vertices[self.triangles]
        T = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=2)  # (nt, 2, 2)
        rhs = x0 - p[:, 0]
        det = T[:, 0, 0] * T[:, 1, 1] - T[:, 0, 1] * T[:, 1, 0]
        l1 = (T[:, 1, 1] * rhs[:, 0] - T[:, 0, 1] * rhs[:, 1]) / det
        l2 = (-T[:, 1, 0] * rhs[:, 0] + T[:, 0, 0] * rhs[:, 1]) / det
        lam = np.stack([1 - l1 - l2, l1, l2], axis=1)
        inside = np.flatnonzero(np.all(lam >= -1e-12, axis=1))
        if inside.size == 0:
            raise MeshError(f"point {x0.tolist()} lies outside the mesh")
        t = int(inside[0])
        return t, np.clip(lam[t], 0.0, 1.0)

    # text I/O -----------------------------------------------------------
    def write(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(f"{self.n_vertices}\n")
            for x, y in self.vertices.tolist():
                fh.write(f"{x!r} {y!r}\n")
            fh.write(f"{self.n_triangles}\n")
            for t in self.triangles:
                fh.write(f"{t[0]} {t[1]} {t[2]}\n")
            fh.write(f"{len(self.boundary_edges)}\n")
            for (i, j), tag in zip(self.boundary_edges, self.boundary_tags):
                fh.write(f"{i} {j} {tag}\n")

    @classmethod
    def read(cls, path) -> "TriMesh":
        with open(path) as fh:
            lines = [ln.split("#", 1)[0].split() for ln in fh]
        lines = [ln for ln in lines if ln]
        pos = 0

        def block(parse):
            nonlocal pos
            n = int(lines[pos][0])
            rows = [parse(ln) for ln in lines[pos + 1: pos + 1 + n]]
            if len(rows) != n:
                raise MeshError(f"{path}: truncated section, expected {n} lines")
            pos += n + 1
            return rows

        verts = block(lambda ln: (float(ln[0]), float(ln[1])))
        tris = block(lambda ln: (int(ln[0]), int(ln[1]), int(ln[2])))
        bnd = block(lambda ln: (int(ln[0]), int(ln[1]), ln[2]))
        return cls(np.array(verts), np.array(tris),
                   np.array([b[:2] for b in bnd], dtype=np.intp).reshape(-1, 2),
                   np.array([b[2] for b in bnd], dtype=object))


def _boundary_edges(triangles: np.ndarray) -> np.ndarray:
    loc = np.array([[1, 2], [2, 0], [0, 1]])
    e = triangles[:, loc].reshape(-1, 2)
    key = np.sort(e, axis=1)
    _, inv, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
    return e[counts[inv.ravel()] == 1]  # keeps the triangle's orientation


def rectangle_mesh(x0: float, x1: float, y0: float, y1: float, nx: int, ny: int,
                   pattern: str = "slash",
                   holes: Sequence[tuple[float, float, float, float]] = (),
                   tagger: Callable[[np.ndarray], str] | None = None) -> TriMesh:
    """Structured triangulation of a rectangle, optionally with rectangular holes.

    Parameters
    ----------
    pattern : {"slash", "mirror", "crossed"}
        ``slash`` splits every cell along its rising diagonal, which is
        symmetric under swapping x and y on a square. ``mirror`` flips the
        diagonal in the right half so the mesh is symmetric about the vertical
        centerline. ``crossed`` adds a center vertex and four triangles per cell.
    holes : list of (xa, xb, ya, yb)
        Cells whose centers fall inside a hole are removed; hole sides should
        sit on grid lines.
    tagger : callable, optional
        Maps an edge midpoint to a tag. The default tags the outer sides
        ``bottom``, ``right``, ``top``, ``left`` and hole sides ``hole1``, ...
    """
    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    X, Y = np.meshgrid(xs, ys, indexing="xy")
    verts = [np.column_stack([X.ravel(), Y.ravel()])]
    vid = lambda i, j: j * (nx + 1) + i
    nv = (nx + 1) * (ny + 1)
    xmid = 0.5 * (x0 + x1)
    tris = []
    centers = []
    for j in range(ny):
        for i in range(nx):
            cx, cy = 0.5 * (xs[i] + xs[i + 1]), 0.5 * (ys[j] + ys[j + 1])
            if any(xa < cx < xb and ya < cy < yb for xa, xb, ya, yb in holes):
                continue
            a, b, c, d = vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)
            if pattern == "slash" or (pattern == "mirror" and cx < xmid):
                tris += [(a, b, c), (a, c, d)]
            elif pattern == "mirror":
                tris += [(a, b, d), (b, c, d)]
            elif pattern == "crossed":
                m = nv + len(centers)
                centers.append((cx, cy))
                tris += [(a, b, m), (b, c, m), (c, d, m), (d, a, m)]
            else:
                raise ValueError(f"unknown pattern {pattern!r}")
    if centers:
        verts.append(np.array(centers))
    vertices = np.vstack(verts)
    triangles = np.array(tris, dtype=np.intp)
    used = np.unique(triangles)
    remap = -np.ones(len(vertices), dtype=np.intp)
    remap[used] = np.arange(len(used))
    vertices, triangles = vertices[used], remap[triangles]

    bedges = _boundary_edges(triangles)
    if tagger is None:
        tagger = _default_tagger(x0, x1, y0, y1, holes)
    mids = 0.5 * (vertices[bedges[:, 0]] + vertices[bedges[:, 1]])
    tags = np.array([tagger(m) for m in mids], dtype=object)
    order = np.lexsort((bedges[:, 1], bedges[:, 0]))
    return TriMesh(vertices, triangles, bedges[order], tags[order])


def _default_tagger(x0, x1, y0, y1, holes):
    scale = max(x1 - x0, y1 - y0)
    tol = 1e-9 * scale

    def tag(m):
        x, y = m
        for h, (xa, xb, ya, yb) in enumerate(holes):
            if xa - tol <= x <= xb + tol and ya - tol <= y <= yb + tol:
                return f"hole{h + 1}"
        if abs(y - y0) < tol:
            return "bottom"
        if abs(y - y1) < tol:
            return "top"
        if abs(x - x0) < tol:
            return "left"
        if abs(x - x1) < tol:
            return "right"
        raise MeshError(f"cannot tag boundary edge at {m}")

    return tag


def unit_square_mesh(n: int, pattern: str = "slash", tagger=None) -> TriMesh:
    return rectangle_mesh(0.0, 1.0, 0.0, 1.0, n, n, pattern=pattern, tagger=tagger)
