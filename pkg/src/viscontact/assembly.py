"""P1 tetrahedral assembly of mass, stiffness, damping and Gram matrices."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .geometry import CONTACT, HalfSpace, Mesh
from .linalg import extreme_generalized_eigenvalue
from .material import VOIGT_WEIGHTS, MaterialParams, voigt_matrix

CONSTRAINED = -1


class AssemblyError(ValueError):
    pass


@dataclass(frozen=True)
class DofMap:
    """Vertex-component to global free dof numbering (vertex-major)."""

    dof: np.ndarray  # (nv, 3) free dof index or CONSTRAINED
    free: np.ndarray  # (n_free,) flat full-dof index 3*v + c of every free dof

    @classmethod
    def clamped(cls, mesh: Mesh) -> "DofMap":
        """All three components constrained on vertices of Dirichlet facets."""
        return cls.from_constrained(mesh.n_vertices, mesh.dirichlet_vertices())

    @classmethod
    def unconstrained(cls, mesh: Mesh) -> "DofMap":
        return cls.from_constrained(mesh.n_vertices, [])

    @classmethod
    def from_constrained(cls, n_vertices: int, vertices) -> "DofMap":
        mask = np.ones((n_vertices, 3), dtype=bool)
        mask[np.asarray(vertices, dtype=int)] = False
        dof = np.full((n_vertices, 3), CONSTRAINED, dtype=int)
        dof[mask] = np.arange(mask.sum())
        return cls(dof, np.flatnonzero(mask.ravel()))

    @property
    def n_free(self) -> int:
        return len(self.free)

    def restrict(self, full) -> np.ndarray:
        """Free entries of a full nodal vector (nv*3,) or (nv, 3)."""
        return np.asarray(full, dtype=float).reshape(-1)[self.free]

    def restrict_matrix(self, A) -> sp.csr_matrix:
        A = sp.csr_matrix(A)
        return A[self.free][:, self.free].tocsr()

    def to_full(self, u) -> np.ndarray:
        """Nodal (nv, 3) array with zeros on constrained components."""
        out = np.zeros(self.dof.size)
        out[self.free] = u
        return out.reshape(-1, 3)


@dataclass(frozen=True)
class ContactTable:
    """Nodal quadrature data on the contact boundary."""

    vertices: np.ndarray  # contact vertex ids
    weights: np.ndarray  # lumped facet area per vertex
    rest_gap: np.ndarray  # x.q at each contact vertex
    trace: sp.csr_matrix  # (n_contact, n_free): u -> u(x).q at contact vertices

    def gaps(self, u) -> np.ndarray:
        return self.rest_gap + self.trace @ u


@dataclass(frozen=True)
class FemSystem:
    mesh: Mesh
    material: MaterialParams
    hs: HalfSpace
    dofs: DofMap
    M: sp.csr_matrix  # 2 rho \int u.v
    K: sp.csr_matrix
    C: sp.csr_matrix
    GramH1: sp.csr_matrix
    GramL2: sp.csr_matrix
    GramGrad: sp.csr_matrix
    StrainGram: sp.csr_matrix  # \int e(u):e(v)
    GramTrace: sp.csr_matrix
    contact: ContactTable
    volume: float

    @property
    def n(self) -> int:
        return self.dofs.n_free


def shape_gradients(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Gradients (nt, 4, 3) of the P1 basis and volumes (nt,) for tets x (nt, 4, 3)."""
    x = np.asarray(x, dtype=float).reshape(-1, 4, 3)
    mat = np.concatenate([np.ones((len(x), 4, 1)), x], axis=2)
    vol = np.linalg.det(mat) / 6.0
    if np.any(vol <= 0):
        raise AssemblyError("degenerate or inverted tetrahedron")
    inv = np.linalg.inv(mat)
    return np.transpose(inv[:, 1:, :], (0, 2, 1)), vol


def strain_matrix(x) -> np.ndarray:
    """Map (.., 6, 12) from nodal displacements (3a + c ordering) to Voigt strain."""
    g, _ = shape_gradients(x)
    nt = len(g)
    B = np.zeros((nt, 6, 12))
    for a in range(4):
        c = 3 * a
        B[:, 0, c] = g[:, a, 0]
        B[:, 1, c + 1] = g[:, a, 1]
        B[:, 2, c + 2] = g[:, a, 2]
        B[:, 3, c + 1] = 0.5 * g[:, a, 2]
        B[:, 3, c + 2] = 0.5 * g[:, a, 1]
        B[:, 4, c + 0] = 0.5 * g[:, a, 2]
        B[:, 4, c + 2] = 0.5 * g[:, a, 0]
        B[:, 5, c + 0] = 0.5 * g[:, a, 1]
        B[:, 5, c + 1] = 0.5 * g[:, a, 0]
    return B[0] if np.ndim(x) == 2 else B


def element_matrices(mesh: Mesh, p: MaterialParams) -> dict[str, np.ndarray]:
    """Per-element 12x12 matrices keyed by name."""
    x = mesh.vertices[mesh.tets]
    g, vol = shape_gradients(x)
    B = strain_matrix(x)
    eye3 = np.eye(3)
    scalar_mass = (np.ones((4, 4)) + np.eye(4)) / 20.0
    mass = vol[:, None, None] * np.kron(scalar_mass, eye3)[None]
    grad = vol[:, None, None] * np.einsum("nai,nbi,cd->nacbd", g, g, eye3).reshape(-1, 12, 12)

    def weighted(d):
        return vol[:, None, None] * np.einsum("nki,kl,nlj->nij", B, d, B)

    return {
        "M": 2.0 * p.rho * mass,
        "K": weighted(voigt_matrix(p.lam, p.mu)),
        "C": weighted(voigt_matrix(p.theta, p.xi)),
        "L2": mass,
        "Grad": grad,
        "Strain": weighted(np.diag(VOIGT_WEIGHTS)),
    }


def _scatter(mesh: Mesh, blocks: np.ndarray) -> sp.csr_matrix:
    n = 3 * mesh.n_vertices
    idx = (3 * mesh.tets[:, :, None] + np.arange(3)).reshape(-1, 12)
    rows = np.repeat(idx, 12, axis=1).ravel()
    cols = np.tile(idx, (1, 12)).ravel()
    A = sp.coo_matrix((blocks.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    A.sum_duplicates()
    return A


def assemble_full(mesh: Mesh, p: MaterialParams) -> dict[str, sp.csr_matrix]:
    """Unconstrained global matrices over all 3*nv dofs."""
    return {k: _scatter(mesh, v) for k, v in element_matrices(mesh, p).items()}


def contact_table(mesh: Mesh, hs: HalfSpace, dofs: DofMap) -> ContactTable:
    facets = mesh.boundary_facets[mesh.facet_class == CONTACT]
    areas = mesh.facet_areas()[mesh.facet_class == CONTACT]
    lumped = np.zeros(mesh.n_vertices)
    np.add.at(lumped, facets.ravel(), np.repeat(areas / 3.0, 3))
    verts = np.unique(facets)
    rows, cols, vals = [], [], []
    for r, v in enumerate(verts):
        for c in range(3):
            d = dofs.dof[v, c]
            if d != CONSTRAINED and hs.q[c] != 0.0:
                rows.append(r)
                cols.append(d)
                vals.append(hs.q[c])
    trace = sp.csr_matrix((vals, (rows, cols)), shape=(len(verts), dofs.n_free))
    return ContactTable(verts, lumped[verts], mesh.vertices[verts] @ hs.q, trace)


def assemble(mesh: Mesh, p: MaterialParams, dofs: DofMap | None = None, hs: HalfSpace | None = None) -> FemSystem:
    """Assemble every matrix restricted to the free dofs of ``dofs`` (default: clamp Dirichlet facets)."""
    dofs = DofMap.clamped(mesh) if dofs is None else dofs
    hs = HalfSpace([0.0, 0.0, 1.0]) if hs is None else hs
    if dofs.n_free == 0:
        raise AssemblyError("no free degrees of freedom")
    full = assemble_full(mesh, p)
    R = {k: dofs.restrict_matrix(v) for k, v in full.items()}
    table = contact_table(mesh, hs, dofs)
    gram_trace = (table.trace.T @ sp.diags(table.weights) @ table.trace).tocsr()
    return FemSystem(
        mesh=mesh,
        material=p,
        hs=hs,
        dofs=dofs,
        M=R["M"],
        K=R["K"],
        C=R["C"],
        GramH1=(R["L2"] + R["Grad"]).tocsr(),
        GramL2=R["L2"],
        GramGrad=R["Grad"],
        StrainGram=R["Strain"],
        GramTrace=gram_trace,
        contact=table,
        volume=float(mesh.tet_volumes().sum()),
    )


def assemble_load(mesh: Mesh, f, t: float = 0.0, dofs: DofMap | None = None) -> np.ndarray:
    """Consistent P1 load by nodal (vertex) quadrature on each tet.

    ``f`` is either a constant 3-vector or a callable ``f(x, t)`` returning
    an (n, 3) array for points x (n, 3). Returns the full (3*nv,) vector, or
    its free part when ``dofs`` is given.
    """
    if callable(f):
        fv = np.asarray(f(mesh.vertices, t), dtype=float).reshape(-1, 3)
    else:
        fv = np.broadcast_to(np.asarray(f, dtype=float).reshape(3), mesh.vertices.shape)
    vol = mesh.tet_volumes()
    load = np.zeros((mesh.n_vertices, 3))
    np.add.at(load, mesh.tets.ravel(), np.repeat(vol / 4.0, 4)[:, None] * fv[mesh.tets.ravel()])
    load = load.ravel()
    return load if dofs is None else dofs.restrict(load)


def estimate_korn_constant(sys: FemSystem, tol: float = 1e-8, seed: int = 0) -> float:
    """Discrete Korn constant ``max(1/sqrt(sigma_min), sqrt(sigma_max))`` of the pencil (StrainGram, GramH1)."""
    smin = extreme_generalized_eigenvalue(sys.StrainGram, sys.GramH1, "smallest", tol=tol, seed=seed)
    smax = extreme_generalized_eigenvalue(sys.StrainGram, sys.GramH1, "largest", tol=tol, seed=seed + 1)
    return float(max(np.sqrt(1.0 / smin), np.sqrt(smax)))


TRACE_EPSILONS = (1e-3, 1e-2, 1e-1, 1.0)


def trace_constant(sys: FemSystem, epsilons=TRACE_EPSILONS, tol: float = 1e-10, seed: int = 0) -> float:
    """Smallest c with ``|v.q|^2_{L2(contact)} <= (c/eps)|v|^2_{L2} + c eps |grad v|^2`` on every sampled eps.

    For each eps the sharp value is the top eigenvalue of the pencil
    (GramTrace, GramL2/eps + eps GramGrad); the fitted constant is their maximum.
    """
    best = 0.0
    for eps in epsilons:
        B = (sys.GramL2 / eps + eps * sys.GramGrad).tocsr()
        lam = extreme_generalized_eigenvalue(sys.GramTrace, B, "largest", tol=tol, seed=seed)
        best = max(best, float(lam))
    return best
