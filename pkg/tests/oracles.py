"""Independent dense reference computations used to cross-check the package.

Nothing here imports the assembly, penalty or dynamics code paths under test:
basis gradients come from face normals, tensors are the full 81-component
arrays, integrals use a Keast quadrature rule and the Newmark step is a plain
dense Newton loop on the unreduced system.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

# 4-point rule, exact for quadratics on a tetrahedron
_KA, _KB = 0.5854101966249685, 0.1381966011250105
KEAST4 = np.array([[_KA if i == j else _KB for i in range(4)] for j in range(4)])


def full_tensor(first: float, second: float) -> np.ndarray:
    d = np.eye(3)
    return (
        first * np.einsum("ij,kl->ijkl", d, d)
        + second * (np.einsum("ik,jl->ijkl", d, d) + np.einsum("il,jk->ijkl", d, d))
    )


def tet_volume(x) -> float:
    return float(np.dot(x[1] - x[0], np.cross(x[2] - x[0], x[3] - x[0]))) / 6.0


def basis_gradients(x) -> np.ndarray:
    """Gradient of each barycentric coordinate via the normal of the opposite face."""
    g = np.empty((4, 3))
    for a in range(4):
        b, c, d = (k for k in range(4) if k != a)
        n = np.cross(x[c] - x[b], x[d] - x[b])
        g[a] = n / np.dot(n, x[a] - x[b])
    return g


def element_stiffness(x, first: float, second: float) -> np.ndarray:
    """12x12 matrix of  \\int T e(phi_(a,i)) : e(phi_(b,k))  with T the isotropic tensor."""
    T = full_tensor(first, second)
    g = basis_gradients(x)
    vol = abs(tet_volume(x))
    Ke = np.zeros((12, 12))
    for a, i, b, k in itertools.product(range(4), range(3), range(4), range(3)):
        s = 0.0
        for j, l in itertools.product(range(3), range(3)):
            s += T[i, j, k, l] * g[a, j] * g[b, l]
        Ke[3 * a + i, 3 * b + k] = vol * s
    return Ke


def element_mass(x, density: float = 1.0) -> np.ndarray:
    vol = abs(tet_volume(x))
    Me = np.zeros((12, 12))
    for lam in KEAST4:
        for a, b in itertools.product(range(4), range(4)):
            for i in range(3):
                Me[3 * a + i, 3 * b + i] += density * vol / 4.0 * lam[a] * lam[b]
    return Me


def element_load(x, f) -> np.ndarray:
    vol = abs(tet_volume(x))
    fe = np.zeros(12)
    for lam in KEAST4:
        for a in range(4):
            fe[3 * a : 3 * a + 3] += vol / 4.0 * lam[a] * np.asarray(f, dtype=float)
    return fe


def dense_system(mesh, lam, mu, theta, xi, rho):
    """Unreduced dense (M, K, C) over all 3*nv dofs."""
    n = 3 * len(mesh.vertices)
    M, K, C = np.zeros((n, n)), np.zeros((n, n)), np.zeros((n, n))
    for tet in mesh.tets:
        x = mesh.vertices[tet]
        idx = np.array([3 * v + c for v in tet for c in range(3)])
        sel = np.ix_(idx, idx)
        M[sel] += element_mass(x, 2.0 * rho)
        K[sel] += element_stiffness(x, lam, mu)
        C[sel] += element_stiffness(x, theta, xi)
    return M, K, C


def dense_load(mesh, f) -> np.ndarray:
    F = np.zeros(3 * len(mesh.vertices))
    for tet in mesh.tets:
        idx = np.array([3 * v + c for v in tet for c in range(3)])
        F[idx] += element_load(mesh.vertices[tet], f)
    return F


def lumped_contact_weights(mesh, contact_label) -> dict:
    """Vertex -> one third of the area of every contact facet touching it."""
    w = {}
    for tri, cls in zip(mesh.boundary_facets, mesh.facet_class):
        if cls != contact_label:
            continue
        x = mesh.vertices[tri]
        area = 0.5 * np.linalg.norm(np.cross(x[1] - x[0], x[2] - x[0]))
        for v in tri:
            w[int(v)] = w.get(int(v), 0.0) + area / 3.0
    return w


def dense_penalty(mesh, weights: dict, q, u_full, kappa):
    """Penalty force and its generalized Jacobian on the unreduced system."""
    n = 3 * len(mesh.vertices)
    force, jac = np.zeros(n), np.zeros((n, n))
    for v, w in weights.items():
        g = float(np.dot(mesh.vertices[v] + u_full[3 * v : 3 * v + 3], q))
        if g < 0:
            sl = slice(3 * v, 3 * v + 3)
            force[sl] += w * (-g) / kappa * q
            jac[sl, sl] += w / kappa * np.outer(q, q)
    return force, jac


def dense_newmark_step(M, K, C, fixed, pen, u, v, a, f_next, dt, tol=1e-13, maxit=100):
    """One average-acceleration step; ``pen(u) -> (force, jac)``; Dirichlet rows replaced by u_d = 0."""
    c0, c1 = 4.0 / dt**2, 2.0 / dt
    Keff = c0 * M + c1 * C + K
    rhs = M @ (c0 * (u + dt * v) + a) + C @ (c1 * u + v) + f_next
    x = u.copy()
    for _ in range(maxit):
        force, jac = pen(x)
        R = Keff @ x - rhs - force
        J = Keff + jac
        R[fixed] = x[fixed]
        J[fixed, :] = 0.0
        J[fixed, fixed] = 1.0
        if np.linalg.norm(R) <= tol * (1.0 + np.linalg.norm(rhs)):
            break
        x = x - np.linalg.solve(J, R)
    a_new = c0 * (x - u - dt * v) - a
    v_new = c1 * (x - u) - v
    return x, v_new, a_new


def damped_oscillator(m, c, k, u0, v0, t) -> np.ndarray:
    """Closed-form solution of m u'' + c u' + k u = 0 (underdamped)."""
    zeta = c / (2.0 * math.sqrt(k * m))
    wn = math.sqrt(k / m)
    wd = wn * math.sqrt(1.0 - zeta**2)
    A = u0
    B = (v0 + zeta * wn * u0) / wd
    t = np.asarray(t, dtype=float)
    return np.exp(-zeta * wn * t) * (A * np.cos(wd * t) + B * np.sin(wd * t))
