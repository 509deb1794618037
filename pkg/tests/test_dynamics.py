import numpy as np
import pytest

import oracles
from helpers import dense_step_case, oscillator_history, reference_problem, reference_system
from viscontact import dynamics
from viscontact.dynamics import (
    AdmissibilityError,
    ForceSpec,
    Integrator,
    LoadHistory,
    ProblemData,
    StepFailure,
    TimeGrid,
    simulate,
)


def test_time_grid():
    g = TimeGrid(1.0, 0.25, 0.5)
    assert g.steps == 4 and g.T0_index == 2
    np.testing.assert_allclose(g.times, [0, 0.25, 0.5, 0.75, 1.0])
    for args in ((1.0, 0.3), (1.0, 0.25, 0.6), (1.0, 0.25, 1.0), (0.0, 0.1), (1.0, -0.1)):
        with pytest.raises(ValueError):
            TimeGrid(*args)


def test_force_switch_off_is_right_continuous():
    f = ForceSpec((0, 0, -1), 1.0)
    assert f.active(0.999) and not f.active(1.0) and not f.active(2.0)
    assert f.active_on(0.9, 1.0) and not f.active_on(1.0, 1.1)
    assert ForceSpec((0, 0, -1)).active(1e9)
    assert ForceSpec().is_zero and not f.is_zero


def test_zero_data_stays_zero(cube2_sys):
    data = ProblemData.zero(cube2_sys)
    traj = simulate(cube2_sys, data, TimeGrid(0.05, 0.01), 1e-3)
    assert not np.any(traj.U) and not np.any(traj.V) and not np.any(traj.A)
    for name in ("kinetic", "elastic", "penalty_energy", "work", "E_total", "violation_l2", "dissipation_cum"):
        assert not np.any(traj.energy.column(name)), name


def test_damped_oscillator_matches_closed_form():
    m, c, k = 2.0, 0.1, 4.0
    errs = []
    for dt in (1e-3, 5e-4):
        t, u = oscillator_history(m, c, k, 1.0, 0.0, 10.0, dt)
        ref = oracles.damped_oscillator(m, c, k, 1.0, 0.0, t)
        errs.append(np.max(np.abs(u - ref)) / np.max(np.abs(ref)))
    assert errs[0] <= 1e-3
    assert 3.2 <= errs[0] / errs[1] <= 4.8


def test_single_step_matches_dense_newton_oracle():
    s1, s0, dense, a0, pen = dense_step_case(dt=0.05, kappa=1e-3)
    np.testing.assert_allclose(s0.a, a0, rtol=1e-12, atol=1e-12)
    assert np.any(pen(dense[0])[0])  # contact is active after the step
    for got, ref in zip((s1.u, s1.v, s1.a), dense):
        np.testing.assert_allclose(got, ref, rtol=0, atol=1e-10 * max(1.0, np.abs(ref).max()))
    assert s1.penalty.active.any() and s1.newton_iters >= 1


def test_admissibility_enforced(cube2_sys):
    data = ProblemData.offset(cube2_sys, -0.01)
    with pytest.raises(AdmissibilityError) as err:
        simulate(cube2_sys, data, TimeGrid(0.01, 0.01), 1e-3)
    assert err.value.vertex is not None


def test_step_failure_reports_index(cube2_sys, monkeypatch):
    monkeypatch.setattr(dynamics, "NEWTON_MAX_ITER", 0)
    data = ProblemData.zero(cube2_sys, ForceSpec((0, 0, -1.0)))
    with pytest.raises(StepFailure) as err:
        simulate(cube2_sys, data, TimeGrid(0.02, 0.01), 1e-3)
    assert err.value.step_index == 1
    assert len(err.value.trace) == 1


def test_step_halving_recovers(cube2_sys, monkeypatch):
    calls = []
    original = Integrator.step

    def flaky(self, state, dt, f_next):
        calls.append(dt)
        if len(calls) == 1:
            raise StepFailure("injected", [1.0])
        return original(self, state, dt, f_next)

    monkeypatch.setattr(Integrator, "step", flaky)
    data = ProblemData.zero(cube2_sys, ForceSpec((0, 0, -1.0)))
    traj = simulate(cube2_sys, data, TimeGrid(0.02, 0.01), 1e-3)
    assert calls[:3] == [0.01, 0.005, 0.005]
    assert traj.times[1] == 0.01


def test_hooks_see_every_step(cube2_sys):
    seen = []
    data = ProblemData.zero(cube2_sys, ForceSpec((0, 0, -1.0)))
    simulate(cube2_sys, data, TimeGrid(0.05, 0.01), 1e-3, hooks=[lambda k, s, row: seen.append((k, s.t, row["t"]))])
    assert [k for k, *_ in seen] == list(range(6))
    assert all(abs(t - r) == 0 for _, t, r in seen)


def test_load_history_switches_off(cube2_sys):
    lh = LoadHistory(cube2_sys, ForceSpec((0, 0, -1.0), 0.5))
    assert np.any(lh(0.49)) and not np.any(lh(0.5))


def test_penetration_shrinks_with_kappa():
    sys = reference_system(2)
    data = ProblemData.zero(sys, ForceSpec((0, 0, -0.5)))
    grid = TimeGrid(0.5, 1e-3)
    depth = [-simulate(sys, data, grid, k).energy.column("min_gap").min() for k in (1e-2, 1e-3, 1e-4)]
    assert depth[0] > depth[1] > depth[2] > 0


def test_complementarity_along_trajectory(cube2_sys):
    data, grid = reference_problem(cube2_sys, T=0.3, dt=1e-3, T0=0.1)
    hits = []

    def check(k, state, row):
        p = state.penalty
        hits.append(np.all(p.pressure * np.maximum(p.gap, 0.0) == 0))

    simulate(cube2_sys, data, grid, 1e-3, hooks=[check])
    assert all(hits)


@pytest.fixture(scope="module")
def velocity_peaks():
    """max_n |v_n|_M on the reference scenario for each kappa, plus the Gronwall constant b."""
    from viscontact.analysis import gronwall_b
    from viscontact.assembly import estimate_korn_constant

    sys = reference_system(4)
    data, grid = reference_problem(sys)
    peaks = {}
    for kappa in (1e-2, 1e-3, 1e-4):
        V = simulate(sys, data, grid, kappa).V
        peaks[kappa] = float(np.sqrt(np.max(np.einsum("ij,ij->i", V, (sys.M @ V.T).T))))
    return peaks, gronwall_b(sys, data, grid, estimate_korn_constant(sys)), grid.T


def test_velocity_bounded_uniformly_in_kappa(velocity_peaks):
    peaks, b, T = velocity_peaks
    # rho |v|^2 = |v|_M^2 / 2 stays below the a-priori bound b e^T for every kappa
    assert all(0.5 * p**2 <= b * np.exp(T) for p in peaks.values())
    # and the peaks do not grow as the constraint is enforced more strongly
    ordered = [peaks[k] for k in sorted(peaks, reverse=True)]
    assert all(a >= b_ for a, b_ in zip(ordered, ordered[1:]))


def test_velocity_peaks_within_factor_1_1_across_kappa(velocity_peaks):
    peaks, _, _ = velocity_peaks
    ratio = max(peaks.values()) / min(peaks.values())
    assert ratio <= 1.1, f"velocity peaks {peaks} differ by a factor {ratio:.3f}"
