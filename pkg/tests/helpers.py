"""Small builders shared by the dynamics, analysis and acceptance tests."""

from types import SimpleNamespace

import numpy as np
import scipy.sparse as sp

import oracles
from conftest import REFERENCE_MATERIAL, unit_cube
from viscontact.assembly import ContactTable, assemble
from viscontact.dynamics import ForceSpec, Integrator, ProblemData, TimeGrid, step
from viscontact.geometry import CONTACT, Mesh

REFERENCE_FORCE = ForceSpec((0.0, 0.0, -0.5), 1.0)


def scalar_system(m: float, c: float, k: float):
    """A one-dof stand-in for FemSystem with an empty contact table."""
    empty = ContactTable(np.zeros(0, int), np.zeros(0), np.zeros(0), sp.csr_matrix((0, 1)))
    mat = lambda x: sp.csr_matrix([[x]])  # noqa: E731
    return SimpleNamespace(M=mat(m), C=mat(c), K=mat(k), contact=empty, n=1)


def oscillator_history(m, c, k, u0, v0, T, dt):
    integ = Integrator(scalar_system(m, c, k), kappa=1.0)
    state = integ.initial_state(np.array([u0]), np.array([v0]), np.zeros(1))
    out = [state.u[0]]
    for _ in range(round(T / dt)):
        state = integ.step(state, dt, np.zeros(1))
        out.append(state.u[0])
    return np.arange(len(out)) * dt, np.array(out)


def reference_system(n: int = 4):
    return assemble(unit_cube(n), REFERENCE_MATERIAL)


def reference_problem(sys, T=4.0, dt=1e-3, T0=1.0):
    return ProblemData.zero(sys, REFERENCE_FORCE), TimeGrid(T, dt, T0)


def single_tet_mesh(x):
    return Mesh(np.asarray(x, dtype=float), np.array([[0, 1, 2, 3]]), np.zeros((0, 3), int), np.zeros(0, int), np.zeros(0, int))


def dense_step_case(dt=0.05, kappa=1e-3):
    """One Newmark step on the 1-cube from a downward velocity, by the library and by the dense oracle.

    Returns (library state, initial state, dense (u1, v1, a1) restricted to free dofs, dense a0 on free dofs, dense penalty).
    """
    mesh = unit_cube(1)
    p = REFERENCE_MATERIAL
    sys = assemble(mesh, p)
    M, K, C = oracles.dense_system(mesh, p.lam, p.mu, p.theta, p.xi, p.rho)
    free = sys.dofs.free
    fixed = np.setdiff1d(np.arange(3 * mesh.n_vertices), free)
    weights = oracles.lumped_contact_weights(mesh, CONTACT)
    q = np.array([0.0, 0.0, 1.0])
    pen = lambda u: oracles.dense_penalty(mesh, weights, q, u, kappa)  # noqa: E731
    F = oracles.dense_load(mesh, (0, 0, -0.5))
    v0 = np.zeros(3 * mesh.n_vertices)
    v0[2::3] = -1.0
    v0[fixed] = 0.0
    u0 = np.zeros_like(v0)
    # consistent initial acceleration on the free rows
    a0 = np.zeros_like(v0)
    rhs = F - C @ v0 - K @ u0 + pen(u0)[0]
    a0[free] = np.linalg.solve(M[np.ix_(free, free)], rhs[free])
    dense = oracles.dense_newmark_step(M, K, C, fixed, pen, u0, v0, a0, F, dt)

    integ = Integrator(sys, kappa)
    s0 = integ.initial_state(u0[free], v0[free], F[free])
    s1 = step(sys, s0, dt, kappa, F[free], integ)
    return s1, s0, tuple(x[free] for x in dense), a0[free], (lambda u: pen(sys.dofs.to_full(u).ravel()))
