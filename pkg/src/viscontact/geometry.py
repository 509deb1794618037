"""Box meshes split into Kuhn tetrahedra, boundary classification and gaps."""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import permutations

import numpy as np

DIRICHLET = 0
CONTACT = 1

_FACE_AXES = {"-x": (0, 0), "+x": (0, 1), "-y": (1, 0), "+y": (1, 1), "-z": (2, 0), "+z": (2, 1)}
# local faces of a tet, each opposite to the vertex not listed
_TET_FACES = ((1, 2, 3), (0, 3, 2), (0, 1, 3), (0, 2, 1))


class MeshError(ValueError):
    pass


@dataclass(frozen=True)
class HalfSpace:
    """``{x : x.q >= 0}`` with the unit normal q."""

    q: np.ndarray

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float).reshape(3)
        n = np.linalg.norm(q)
        if not np.isfinite(n) or n == 0.0:
            raise ValueError("half-space normal must be a nonzero vector")
        q = q / n
        q.setflags(write=False)
        object.__setattr__(self, "q", q)


@dataclass(frozen=True)
class Mesh:
    vertices: np.ndarray  # (nv, 3)
    tets: np.ndarray  # (nt, 4), positively oriented
    boundary_facets: np.ndarray  # (nf, 3), ordered so the right-hand normal points outward
    facet_tet: np.ndarray  # (nf,) owning tet
    facet_class: np.ndarray  # (nf,) DIRICHLET or CONTACT
    bounds: tuple = field(default=None, repr=False)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    def tet_volumes(self) -> np.ndarray:
        x = self.vertices[self.tets]
        return np.einsum("ij,ij->i", x[:, 1] - x[:, 0], np.cross(x[:, 2] - x[:, 0], x[:, 3] - x[:, 0])) / 6.0

    def facet_normals(self) -> np.ndarray:
        """Area-weighted outward normals (length = facet area)."""
        x = self.vertices[self.boundary_facets]
        return 0.5 * np.cross(x[:, 1] - x[:, 0], x[:, 2] - x[:, 0])

    def facet_areas(self) -> np.ndarray:
        return np.linalg.norm(self.facet_normals(), axis=1)

    def dirichlet_vertices(self) -> np.ndarray:
        return np.unique(self.boundary_facets[self.facet_class == DIRICHLET])

    def contact_vertices(self) -> np.ndarray:
        return np.unique(self.boundary_facets[self.facet_class == CONTACT])


def make_box_mesh(lower, upper, subdivisions, dirichlet_face: str = "+z") -> Mesh:
    """Structured box mesh with every cell split into six Kuhn tetrahedra.

    Boundary facets on ``dirichlet_face`` are labelled DIRICHLET, all other
    boundary facets CONTACT. Vertex ordering is x-fastest, then y, then z.
    """
    lower = np.asarray(lower, dtype=float).reshape(3)
    upper = np.asarray(upper, dtype=float).reshape(3)
    n = np.asarray(subdivisions, dtype=int).reshape(3)
    if np.any(upper - lower <= 0) or not np.all(np.isfinite(upper - lower)):
        raise MeshError(f"degenerate box {lower} -> {upper}")
    if np.any(n < 1):
        raise MeshError(f"subdivisions must be >= 1, got {n}")
    if dirichlet_face not in _FACE_AXES:
        raise MeshError(f"unknown dirichlet face {dirichlet_face!r}")

    axes = [np.linspace(lower[d], upper[d], n[d] + 1) for d in range(3)]
    zz, yy, xx = np.meshgrid(axes[2], axes[1], axes[0], indexing="ij")
    vertices = np.column_stack([xx.ravel(), yy.ravel(), zz.ravel()])

    def vid(i, j, k):
        return i + (n[0] + 1) * (j + (n[1] + 1) * k)

    ii, jj, kk = np.meshgrid(np.arange(n[0]), np.arange(n[1]), np.arange(n[2]), indexing="ij")
    ii, jj, kk = (a.transpose(2, 1, 0).ravel() for a in (ii, jj, kk))
    tets = []
    for perm in permutations(range(3)):
        corner = np.zeros((len(ii), 3), dtype=int)
        path = [vid(ii, jj, kk)]
        for axis in perm:
            corner[:, axis] += 1
            path.append(vid(ii + corner[:, 0], jj + corner[:, 1], kk + corner[:, 2]))
        tets.append(np.column_stack(path))
    # cell-major ordering: six tets of a cell are contiguous
    tets = np.stack(tets, axis=1).reshape(-1, 4)

    x = vertices[tets]
    vol = np.einsum("ij,ij->i", x[:, 1] - x[:, 0], np.cross(x[:, 2] - x[:, 0], x[:, 3] - x[:, 0]))
    flip = vol < 0
    tets[flip, 2], tets[flip, 3] = tets[flip, 3].copy(), tets[flip, 2].copy()

    facets, owners = _boundary_facets(tets)
    axis, side = _FACE_AXES[dirichlet_face]
    plane = upper[axis] if side else lower[axis]
    on_face = np.all(np.isclose(vertices[facets][:, :, axis], plane, rtol=0, atol=1e-12 * (1 + abs(plane))), axis=1)
    facet_class = np.where(on_face, DIRICHLET, CONTACT)
    mesh = Mesh(vertices, tets, facets, owners, facet_class, bounds=(tuple(lower), tuple(upper)))
    return mesh


def _boundary_facets(tets: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    faces = np.concatenate([tets[:, list(f)] for f in _TET_FACES])
    owner = np.tile(np.arange(len(tets)), len(_TET_FACES))
    key = np.sort(faces, axis=1)
    _, inverse, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
    once = counts[inverse.ravel()] == 1
    # local faces are listed so that the right-hand normal points away from the
    # opposite vertex, given positive tet orientation
    order = np.lexsort((owner[once],))
    return faces[once][order], owner[once][order]


@dataclass(frozen=True)
class GapField:
    vertices: np.ndarray  # contact vertex ids
    values: np.ndarray

    @property
    def min(self) -> float:
        return float(self.values.min()) if len(self.values) else np.inf

    @property
    def violated(self) -> bool:
        return self.min < 0.0


def rest_gap(mesh: Mesh, hs: HalfSpace) -> GapField:
    """``x . q`` at contact vertices; a negative minimum means the rest configuration is not confined."""
    cv = mesh.contact_vertices()
    return GapField(cv, mesh.vertices[cv] @ hs.q)


def deformed_gap(mesh: Mesh, hs: HalfSpace, u) -> GapField:
    """``(x + u(x)) . q`` at contact vertices for a nodal displacement ``u`` of shape (nv, 3)."""
    u = np.asarray(u, dtype=float)
    if u.shape != mesh.vertices.shape:
        raise ValueError(f"displacement shape {u.shape} does not match mesh vertices {mesh.vertices.shape}")
    cv = mesh.contact_vertices()
    return GapField(cv, (mesh.vertices[cv] + u[cv]) @ hs.q)
