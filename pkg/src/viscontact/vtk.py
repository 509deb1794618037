"""Legacy ASCII VTK unstructured-grid export."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .geometry import Mesh

VTK_TRIANGLE = 5
VTK_TETRA = 10
# cell-data label for volume cells; boundary triangles carry their facet class
VOLUME_LABEL = -1


def write_vtk(path, mesh: Mesh, displacement=None, title: str = "viscontact mesh") -> Path:
    """Write tets followed by boundary triangles; ``facet_class`` is stored as cell data.

    ``displacement`` (nv, 3), when given, is written as point vectors.
    """
    path = Path(path)
    nt, nf = len(mesh.tets), len(mesh.boundary_facets)
    lines = ["# vtk DataFile Version 2.0", title, "ASCII", "DATASET UNSTRUCTURED_GRID"]
    lines.append(f"POINTS {mesh.n_vertices} double")
    lines += [" ".join(repr(float(c)) for c in p) for p in mesh.vertices]
    lines.append(f"CELLS {nt + nf} {5 * nt + 4 * nf}")
    lines += ["4 " + " ".join(str(int(i)) for i in t) for t in mesh.tets]
    lines += ["3 " + " ".join(str(int(i)) for i in f) for f in mesh.boundary_facets]
    lines.append(f"CELL_TYPES {nt + nf}")
    lines += [str(VTK_TETRA)] * nt + [str(VTK_TRIANGLE)] * nf
    lines.append(f"CELL_DATA {nt + nf}")
    lines.append("SCALARS facet_class int 1")
    lines.append("LOOKUP_TABLE default")
    labels = np.concatenate([np.full(nt, VOLUME_LABEL), mesh.facet_class])
    lines += [str(int(v)) for v in labels]
    if displacement is not None:
        u = np.asarray(displacement, dtype=float).reshape(mesh.n_vertices, 3)
        lines.append(f"POINT_DATA {mesh.n_vertices}")
        lines.append("VECTORS displacement double")
        lines += [" ".join(repr(float(c)) for c in row) for row in u]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def read_vtk_cells(path) -> dict:
    """Minimal reader for files produced by :func:`write_vtk` (used in tests and tooling)."""
    tokens = Path(path).read_text(encoding="utf-8").split("\n")
    out = {}
    i = 0
    while i < len(tokens):
        line = tokens[i].strip()
        if line.startswith("POINTS"):
            n = int(line.split()[1])
            out["points"] = np.array([[float(v) for v in tokens[i + 1 + k].split()] for k in range(n)])
            i += n
        elif line.startswith("CELLS"):
            n = int(line.split()[1])
            out["cells"] = [[int(v) for v in tokens[i + 1 + k].split()[1:]] for k in range(n)]
            i += n
        elif line.startswith("CELL_TYPES"):
            n = int(line.split()[1])
            out["cell_types"] = np.array([int(tokens[i + 1 + k]) for k in range(n)])
            i += n
        elif line.startswith("LOOKUP_TABLE") and "cell_types" in out and "facet_class" not in out:
            n = len(out["cell_types"])
            out["facet_class"] = np.array([int(tokens[i + 1 + k]) for k in range(n)])
            i += n
        elif line.startswith("VECTORS displacement"):
            n = len(out["points"])
            out["displacement"] = np.array([[float(v) for v in tokens[i + 1 + k].split()] for k in range(n)])
            i += n
        i += 1
    return out
