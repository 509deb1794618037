"""Hypothesis property suites across modules."""

import math

import numpy as np
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from viscontact import analysis as an
from viscontact.assembly import DofMap
from viscontact.config import build_config, parse_text
from viscontact.geometry import make_box_mesh
from viscontact.material import MaterialParams, contract, elasticity_apply, viscosity_apply
from viscontact.penalty import negative_part, penalty_energy, penalty_jacobian, penalty_residual, penalty_state

finite = st.floats(-1e3, 1e3, allow_nan=False)
voigt = arrays(float, 6, elements=st.floats(-10, 10))
materials = st.builds(
    MaterialParams,
    st.floats(0, 10),
    st.floats(0.01, 10),
    st.floats(0, 10),
    st.floats(0.01, 10),
    st.floats(0.01, 10),
)


@given(finite, finite)
def test_negative_part_monotone_and_lipschitz(a, b):
    na, nb = negative_part(a), negative_part(b)
    assert na >= 0 and nb >= 0
    assert (na - nb) * (a - b) <= 0
    assert abs(na - nb) <= abs(a - b)


@given(finite)
def test_negative_part_splits_identity(a):
    # a = {a}^+ - {a}^-
    assert max(a, 0.0) - negative_part(a) == a


@given(materials, voigt, voigt)
def test_tensors_self_adjoint(p, s, t):
    for apply in (elasticity_apply, viscosity_apply):
        lhs, rhs = contract(apply(p, s), t), contract(s, apply(p, t))
        assert math.isclose(lhs, rhs, rel_tol=1e-12, abs_tol=1e-9)


@given(st.integers(1, 3), st.integers(1, 3), st.integers(1, 3), st.sampled_from(["+z", "-z", "+x", "-y"]))
@settings(max_examples=25, deadline=None)
def test_box_mesh_combinatorics(nx, ny, nz, face):
    mesh = make_box_mesh([0, 0, 0], [1.0, 2.0, 0.5], (nx, ny, nz), face)
    assert mesh.n_vertices == (nx + 1) * (ny + 1) * (nz + 1)
    assert len(mesh.tets) == 6 * nx * ny * nz
    assert math.isclose(mesh.tet_volumes().sum(), 1.0, rel_tol=1e-12)
    assert math.isclose(mesh.facet_areas().sum(), 2 * (2.0 + 0.5 + 1.0), rel_tol=1e-12)
    dofs = DofMap.clamped(mesh)
    assert dofs.n_free == 3 * (mesh.n_vertices - len(mesh.dirichlet_vertices()))


@given(arrays(float, 54, elements=st.floats(-1, 1)))
@settings(max_examples=30)
def test_dofmap_roundtrip(cube2_sys, u):
    dofs = cube2_sys.dofs
    full = dofs.to_full(u)
    np.testing.assert_array_equal(dofs.restrict(full), u)
    assert not np.any(full[cube2_sys.mesh.dirichlet_vertices()])


@given(arrays(float, 54, elements=st.floats(-0.1, 0.1)), st.floats(1e-5, 1.0))
@settings(max_examples=50, deadline=None)
def test_penalty_consistency(cube2_sys, u, kappa):
    table = cube2_sys.contact
    force, state = penalty_residual(table, u, kappa)
    # energy identity and sign of the restoring force along q
    assert math.isclose(penalty_energy(state), 0.5 * kappa * float(table.weights @ state.pressure**2), rel_tol=1e-12, abs_tol=1e-300)
    assert np.all(table.trace @ force >= -1e-15)
    # the Jacobian reproduces the force on the active set: J u = force + J u - force is affine there
    J = penalty_jacobian(table, state.active, kappa)
    lin = J @ u - table.trace.T @ (table.weights * np.where(state.active, -table.rest_gap / kappa, 0.0))
    np.testing.assert_allclose(-lin, force, rtol=1e-10, atol=1e-12 * max(1.0, np.abs(force).max()))


@given(arrays(float, 54, elements=st.floats(-0.1, 0.1)), st.floats(1e-3, 0.5))
@settings(max_examples=30)
def test_uniform_lift_clears_contact(cube2_sys, u, c):
    table = cube2_sys.contact
    lift = cube2_sys.dofs.restrict(np.tile(c * cube2_sys.hs.q, (cube2_sys.mesh.n_vertices, 1)))
    movable = np.diff(table.trace.indptr) > 0  # contact vertices on the clamped edge cannot move
    np.testing.assert_allclose(table.gaps(u + lift)[movable], table.gaps(u)[movable] + c, atol=1e-14)
    state = penalty_state(table, lift, 1e-3)
    assert not state.active.any() and state.violation_sq == 0.0


@given(st.floats(1e-8, 1.0), st.floats(0.1, 5.0), st.floats(1e-6, 10.0), st.floats(1.01, 10.0))
def test_violation_bound_monotone(kappa, T, b, factor):
    base = an.violation_bound(kappa, T, b)
    assert an.violation_bound(kappa * factor, T, b) > base
    assert an.violation_bound(kappa, T * factor, b) > base
    assert math.isclose(an.violation_bound(kappa * factor**2, T, b), factor * base, rel_tol=1e-12)


@given(st.floats(0.01, 10.0), st.floats(1e-3, 1e3), st.floats(0.0, 1.0))
def test_fit_recovers_exact_rate(rate, amp, T0):
    t = np.linspace(0.0, T0 + 4.0, 401)
    got, r2 = an.fit_decay_rate(t, amp * np.exp(-rate * t), T0, t[-1])
    assert math.isclose(got, rate, rel_tol=1e-8)
    assert r2 > 1 - 1e-10


@given(st.floats(1e-4, 10.0), st.floats(1e-4, 10.0), st.floats(0.0, 10.0), st.floats(1e-4, 10.0), st.floats(1.0, 10.0))
def test_smallness_iff_positive_decay_constant(mu, xi, theta, rho, c0):
    p = MaterialParams(1.0, mu, theta, xi, rho)
    lhs, rhs, holds = an.smallness_check(p, c0)
    assume(abs(lhs - rhs) > 1e-9 * rhs)
    if holds:
        d = an.decay_constants(p, c0)
        assert d["c_d"] > 0 and d["C_tilde_factor"] > 0
        lo, hi = an.equivalence_factors(p, c0, d["epsilon"])
        assert 0 < lo <= 1 <= hi
    else:
        assert an.constants_report(p, c0, 1.0).smallness_holds is False


@given(
    st.floats(0.0, 10.0),
    st.floats(0.01, 10.0),
    st.floats(0.0, 10.0),
    st.floats(0.01, 10.0),
    st.floats(0.01, 10.0),
    st.integers(1, 50),
    st.integers(1, 20),
)
def test_config_roundtrip(lam, mu, theta, xi, rho, steps, per_unit):
    dt = 1.0 / per_unit
    text = (
        f"material.lambda = {lam!r}\nmaterial.mu = {mu!r}\nmaterial.theta = {theta!r}\n"
        f"material.xi = {xi!r}\nmaterial.rho = {rho!r}\ntime.T = {steps * dt!r}\ntime.dt = {dt!r}\n"
    )
    cfg = build_config(parse_text(text))
    assert (cfg.material.lam, cfg.material.mu, cfg.material.theta, cfg.material.xi, cfg.material.rho) == (lam, mu, theta, xi, rho)
    assert cfg.dt == dt
