"""Field output: legacy-VTK ASCII unstructured grids and flat CSV tables."""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .mesh import TriMesh

VTK_TRIANGLE = 5


def write_vtk(path, mesh: TriMesh, point_data: dict[str, np.ndarray],
              displacement: np.ndarray | None = None, scale: float = 0.0,
              title: str = "biotuq field") -> None:
    """Write scalar vertex fields; optionally move vertices by ``scale * displacement``.

    ``displacement`` has shape (n_vertices, 2). Values are written with
    ``repr`` so files are reproducible byte for byte.
    """
    pts = mesh.vertices.copy()
    if displacement is not None and scale:
        pts = pts + scale * np.asarray(displacement)
    nv, nt = mesh.n_vertices, mesh.n_triangles
    lines = ["# vtk DataFile Version 3.0", title[:255], "ASCII", "DATASET UNSTRUCTURED_GRID",
             f"POINTS {nv} double"]
    lines += [f"{x!r} {y!r} 0.0" for x, y in pts.tolist()]
    lines.append(f"CELLS {nt} {4 * nt}")
    lines += [f"3 {a} {b} {c}" for a, b, c in mesh.triangles.tolist()]
    lines.append(f"CELL_TYPES {nt}")
    lines += [str(VTK_TRIANGLE)] * nt
    lines.append(f"POINT_DATA {nv}")
    for name, vals in point_data.items():
        vals = np.asarray(vals, dtype=float)
        if vals.shape != (nv,):
            raise ValueError(f"field {name!r} has shape {vals.shape}, expected ({nv},)")
        lines += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
        lines += [repr(v) for v in vals.tolist()]
    Path(path).write_text("\n".join(lines) + "\n")


def read_vtk(path) -> tuple[np.ndarray, np.ndarray, dict[str, np.ndarray]]:
    """Minimal reader for files written by :func:`write_vtk`."""
    tokens = Path(path).read_text().splitlines()
    if not tokens or not tokens[0].startswith("# vtk DataFile Version"):
        raise ValueError(f"{path}: not a legacy VTK file")
    if tokens[2].strip() != "ASCII" or tokens[3].split() != ["DATASET", "UNSTRUCTURED_GRID"]:
        raise ValueError(f"{path}: expected an ASCII UNSTRUCTURED_GRID dataset")
    i = 4
    nv = int(tokens[i].split()[1])
    pts = np.array([list(map(float, ln.split())) for ln in tokens[i + 1:i + 1 + nv]])
    i += 1 + nv
    nt = int(tokens[i].split()[1])
    cells = np.array([list(map(int, ln.split()))[1:] for ln in tokens[i + 1:i + 1 + nt]])
    i += 1 + nt
    i += 1 + nt  # cell types
    data = {}
    if i < len(tokens) and tokens[i].startswith("POINT_DATA"):
        i += 1
        while i < len(tokens) and tokens[i].startswith("SCALARS"):
            name = tokens[i].split()[1]
            data[name] = np.array([float(v) for v in tokens[i + 2:i + 2 + nv]])
            i += 2 + nv
    return pts[:, :2], cells, data


def write_field_csv(path, mesh: TriMesh, u1, u2, p) -> None:
    """One row per vertex: id, x, y, u1, u2, p."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["vertex", "x", "y", "u1", "u2", "p"])
        for i, (xy, a, b, c) in enumerate(zip(mesh.vertices.tolist(), u1, u2, p)):
            w.writerow([i, repr(xy[0]), repr(xy[1]), repr(float(a)), repr(float(b)), repr(float(c))])
