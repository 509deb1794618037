"""Average-acceleration Newmark integration of the penalized Galerkin system.

The semi-discrete equations are ``M a + C v + K u - P(u) = F(t)`` where M carries
the 2*rho factor and P is the penalty force of :mod:`viscontact.penalty`.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp

from .analysis import EnergyTrace
from .assembly import FemSystem, assemble_load
from .linalg import SymmetricSolver
from .penalty import PenaltyState, penalty_jacobian, penalty_residual

log = logging.getLogger(__name__)

NEWTON_RTOL = 1e-10
NEWTON_MAX_ITER = 50
# the residual cannot be resolved below a few ulps of its largest term
ROUNDOFF_FLOOR = 1e3 * np.finfo(float).eps
ADMISSIBILITY_TOL = 1e-12


class StepFailure(RuntimeError):
    def __init__(self, message, trace=(), step_index=None):
        super().__init__(message)
        self.trace = list(trace)
        self.step_index = step_index


class AdmissibilityError(ValueError):
    def __init__(self, message, vertex=None):
        super().__init__(message)
        self.vertex = vertex


@dataclass(frozen=True)
class State:
    t: float
    u: np.ndarray
    v: np.ndarray
    a: np.ndarray
    penalty: PenaltyState
    newton_iters: int = 0


@dataclass(frozen=True)
class TimeGrid:
    T: float
    dt: float
    T0: float | None = None

    def __post_init__(self):
        if not (self.T > 0 and self.dt > 0):
            raise ValueError("T and dt must be positive")
        steps = round(self.T / self.dt)
        if steps < 1 or abs(steps * self.dt - self.T) > 1e-12 * self.T:
            raise ValueError(f"dt={self.dt!r} does not divide T={self.T!r}")
        if self.T0 is not None:
            if not 0 < self.T0 < self.T:
                raise ValueError(f"T0 must lie in (0, T), got {self.T0!r}")
            k = self.T0 / self.dt
            if abs(k - round(k)) > 1e-9 * max(1.0, k):
                raise ValueError(f"T0={self.T0!r} is not on the time grid")

    @property
    def steps(self) -> int:
        return round(self.T / self.dt)

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.steps + 1) * self.dt

    @property
    def T0_index(self) -> int | None:
        return None if self.T0 is None else round(self.T0 / self.dt)


@dataclass(frozen=True)
class ForceSpec:
    """Uniform body force, switched off at ``t_off`` (right-continuous: zero at ``t_off``)."""

    vector: tuple = (0.0, 0.0, 0.0)
    t_off: float | None = None

    def active(self, t: float) -> bool:
        return self.t_off is None or t < self.t_off * (1 - 1e-12)

    def active_on(self, t0: float, t1: float) -> bool:
        """Whether the force is on inside the open interval (t0, t1)."""
        return self.t_off is None or 0.5 * (t0 + t1) < self.t_off

    def value(self, t: float) -> np.ndarray:
        return np.asarray(self.vector, dtype=float) if self.active(t) else np.zeros(3)

    @property
    def is_zero(self) -> bool:
        return not np.any(np.asarray(self.vector, dtype=float))


@dataclass(frozen=True)
class ProblemData:
    u0: np.ndarray
    u1: np.ndarray
    force: ForceSpec = field(default_factory=ForceSpec)

    @classmethod
    def zero(cls, sys: FemSystem, force: ForceSpec | None = None) -> "ProblemData":
        return cls(np.zeros(sys.n), np.zeros(sys.n), force or ForceSpec())

    @classmethod
    def offset(cls, sys: FemSystem, magnitude: float, force: ForceSpec | None = None) -> "ProblemData":
        """Free dofs displaced by ``magnitude * q``; clamped vertices stay put."""
        u0 = sys.dofs.restrict(np.tile(magnitude * sys.hs.q, (sys.mesh.n_vertices, 1)))
        return cls(u0, np.zeros(sys.n), force or ForceSpec())

    def check_admissible(self, sys: FemSystem) -> None:
        gaps = sys.contact.gaps(self.u0)
        bad = np.flatnonzero(gaps < -ADMISSIBILITY_TOL)
        if len(bad):
            v = int(sys.contact.vertices[bad[0]])
            raise AdmissibilityError(f"initial displacement violates the constraint at vertex {v} (gap {gaps[bad[0]]:.3e})", v)


class LoadHistory:
    """Free-dof load vectors F(t) for a ForceSpec on a given system."""

    def __init__(self, sys: FemSystem, force: ForceSpec):
        self.force = force
        self.unit = assemble_load(sys.mesh, force.vector, dofs=sys.dofs)
        self._zero = np.zeros(sys.n)

    def __call__(self, t: float) -> np.ndarray:
        return self.unit if self.force.active(t) else self._zero


class Integrator:
    """Holds per-(dt, active set) factorizations across steps of one simulation."""

    def __init__(self, sys: FemSystem, kappa: float, max_cache: int = 64):
        if not kappa > 0:
            raise ValueError(f"kappa must be positive, got {kappa!r}")
        self.sys = sys
        self.kappa = kappa
        self.max_cache = max_cache
        self._eff: dict[float, sp.csr_matrix] = {}
        self._solvers: dict[tuple, SymmetricSolver] = {}

    def effective(self, dt: float) -> sp.csr_matrix:
        if dt not in self._eff:
            s = self.sys
            self._eff[dt] = (4.0 / dt**2 * s.M + 2.0 / dt * s.C + s.K).tocsc()
        return self._eff[dt]

    def solver(self, dt: float, active: np.ndarray) -> SymmetricSolver:
        key = (dt, active.tobytes())
        if key not in self._solvers:
            if len(self._solvers) >= self.max_cache:
                self._solvers.clear()
            J = self.effective(dt) + penalty_jacobian(self.sys.contact, active, self.kappa)
            self._solvers[key] = SymmetricSolver(J)
        return self._solvers[key]

    def initial_state(self, u0, v0, f0, t0: float = 0.0) -> State:
        s = self.sys
        force, pstate = penalty_residual(s.contact, u0, self.kappa)
        a0 = SymmetricSolver(s.M)(f0 - s.C @ v0 - s.K @ u0 + force)
        return State(t0, np.array(u0, dtype=float), np.array(v0, dtype=float), a0, pstate)

    def step(self, state: State, dt: float, f_next) -> State:
        s = self.sys
        c0, c1 = 4.0 / dt**2, 2.0 / dt
        Keff = self.effective(dt)
        # a(u) = c0 (u - u_n - dt v_n) - a_n,  v(u) = c1 (u - u_n) - v_n
        rhs = s.M @ (c0 * (state.u + dt * state.v) + state.a) + s.C @ (c1 * state.u + state.v) + f_next
        tol = NEWTON_RTOL * (1.0 + np.linalg.norm(f_next))
        u = state.u + dt * state.v + 0.25 * dt**2 * state.a
        trace = []
        for it in range(NEWTON_MAX_ITER + 1):
            force, pstate = penalty_residual(s.contact, u, self.kappa)
            Ku = Keff @ u
            R = Ku - rhs - force
            rnorm = float(np.linalg.norm(R))
            trace.append(rnorm)
            floor = ROUNDOFF_FLOOR * (np.linalg.norm(Ku) + np.linalg.norm(rhs) + np.linalg.norm(force))
            if rnorm <= max(tol, floor):
                a = c0 * (u - state.u - dt * state.v) - state.a
                v = c1 * (u - state.u) - state.v
                return State(state.t + dt, u, v, a, pstate, it)
            if it == NEWTON_MAX_ITER:
                break
            u = u - self.solver(dt, pstate.active)(R)
        raise StepFailure(f"Newton did not converge at t={state.t + dt:.6g}: |R|={trace[-1]:.3e} > {tol:.3e}", trace)


def step(sys: FemSystem, state: State, dt: float, kappa: float, f_next, integrator: Integrator | None = None) -> State:
    """One Newmark (beta=1/4, gamma=1/2) step with a semismooth Newton corrector."""
    integrator = integrator or Integrator(sys, kappa)
    return integrator.step(state, dt, f_next)


@dataclass
class Trajectory:
    times: np.ndarray
    U: np.ndarray  # (steps+1, n)
    V: np.ndarray
    A: np.ndarray
    energy: EnergyTrace
    loads: np.ndarray  # (steps+1, n) load vector used at each grid point
    load_unit: np.ndarray  # load vector while the force is on
    kappa: float
    data: ProblemData
    grid: TimeGrid
    final_penalty: PenaltyState = None

    @property
    def steps(self) -> int:
        return len(self.times) - 1


Hook = Callable[[int, State, dict], None]


def simulate(sys: FemSystem, data: ProblemData, grid: TimeGrid, kappa: float, hooks: Sequence[Hook] = ()) -> Trajectory:
    """Integrate over ``grid`` from consistent initial data; returns the full trajectory."""
    data.check_admissible(sys)
    integ = Integrator(sys, kappa)
    loads = LoadHistory(sys, data.force)
    times = grid.times
    n = sys.n
    U = np.empty((len(times), n))
    V = np.empty_like(U)
    A = np.empty_like(U)
    F = np.empty_like(U)
    energy = EnergyTrace()

    state = integ.initial_state(data.u0, data.u1, loads(0.0))
    prev = None
    for k, t in enumerate(times):
        if k > 0:
            f_next = loads(t)
            try:
                state = integ.step(replace(state, t=times[k - 1]), grid.dt, f_next)
            except StepFailure as first:
                log.warning("step %d failed (%s); retrying with two half steps", k, first)
                try:
                    half = integ.step(replace(state, t=times[k - 1]), 0.5 * grid.dt, loads(times[k - 1] + 0.5 * grid.dt))
                    state = integ.step(half, 0.5 * grid.dt, f_next)
                    state = replace(state, newton_iters=half.newton_iters + state.newton_iters)
                except StepFailure as second:
                    raise StepFailure(f"step {k} failed after halving: {second}", second.trace, k) from second
            state = replace(state, t=t)
        U[k], V[k], A[k] = state.u, state.v, state.a
        F[k] = loads(t)
        row = energy.append(sys, state, F[k], prev, prev_load=None if prev is None else F[k - 1])
        for hook in hooks:
            hook(k, state, row)
        prev = state
    return Trajectory(times, U, V, A, energy, F, loads.unit, kappa, data, grid, state.penalty)
