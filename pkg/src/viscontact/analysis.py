"""Energies, a-priori constants, decay-rate fits and the variational-inequality residual."""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .assembly import FemSystem
from .material import MaterialParams, max_tensor_component, positive_definiteness_constants
from .penalty import penalty_energy

TRACE_COLUMNS = (
    "t",
    "kinetic",
    "elastic",
    "penalty_energy",
    "work",
    "E_total",
    "violation_l2",
    "min_gap",
    "dissipation_cum",
    "newton_iters",
)


class SmallnessError(ValueError):
    def __init__(self, lhs, rhs):
        super().__init__(f"smallness condition fails: lhs={lhs!r} > rhs={rhs!r}")
        self.lhs, self.rhs = lhs, rhs


class FitError(ValueError):
    pass


def fmt(x) -> str:
    """Shortest round-trip decimal for floats, plain digits for ints."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


# ----------------------------------------------------------------- energies


def energy_row(sys: FemSystem, state, f_t, kappa: float | None = None) -> dict:
    """Energy decomposition at one instant; ``E_total = kinetic + elastic + penalty - f.u``."""
    u, v = state.u, state.v
    pstate = state.penalty
    kinetic = 0.5 * float(v @ (sys.M @ v))  # = rho \int |v|^2 since M carries 2 rho
    elastic = 0.5 * float(u @ (sys.K @ u))
    pen = penalty_energy(pstate)
    work = float(np.dot(f_t, u))
    return {
        "t": float(state.t),
        "kinetic": kinetic,
        "elastic": elastic,
        "penalty_energy": pen,
        "work": work,
        "E_total": kinetic + elastic + pen - work,
        "violation_l2": pstate.violation_l2,
        "min_gap": pstate.min_gap,
        "max_pressure": pstate.max_pressure,
        "newton_iters": int(state.newton_iters),
    }


class EnergyTrace:
    """Per-step rows; adds the viscous dissipation and the external work by Newmark-consistent quadrature."""

    def __init__(self):
        self.rows: list[dict] = []

    def __len__(self) -> int:
        return len(self.rows)

    def append(self, sys: FemSystem, state, f_t, prev=None, prev_load=None) -> dict:
        row = energy_row(sys, state, f_t)
        if prev is None:
            row["dissipation"] = 0.0
            row["dissipation_cum"] = 0.0
            row["work_in_cum"] = 0.0
        else:
            dt = state.t - prev.t
            vm = 0.5 * (state.v + prev.v)
            row["dissipation"] = dt * float(vm @ (sys.C @ vm))
            row["dissipation_cum"] = self.rows[-1]["dissipation_cum"] + row["dissipation"]
            work_in = 0.5 * float(np.dot(prev_load + f_t, state.u - prev.u))
            row["work_in_cum"] = self.rows[-1]["work_in_cum"] + work_in
        self.rows.append(row)
        return row

    def column(self, name: str) -> np.ndarray:
        return np.array([r[name] for r in self.rows])

    @property
    def t(self) -> np.ndarray:
        return self.column("t")

    @property
    def mechanical(self) -> np.ndarray:
        """``rho|v|^2 + 1/2 A e:e + penalty``, the energy of the decay estimate."""
        return self.column("kinetic") + self.column("elastic") + self.column("penalty_energy")

    def identity_defect(self) -> np.ndarray:
        """``E(t) + dissipated - external work - E(0)`` at each step."""
        e = self.mechanical
        return e + self.column("dissipation_cum") - self.column("work_in_cum") - e[0]

    def write_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(TRACE_COLUMNS)
            for r in self.rows:
                w.writerow([fmt(r[c]) for c in TRACE_COLUMNS])
        return path


# ---------------------------------------------------------------- constants


@dataclass(frozen=True)
class ConstantsReport:
    c0: float
    ce1: float
    ce2: float
    maxA: float
    maxB: float
    b: float
    smallness_lhs: float
    smallness_rhs: float
    smallness_holds: bool
    epsilon: float
    eta: float
    c_d: float
    C_tilde_factor: float

    def as_dict(self) -> dict:
        return asdict(self)

    def write(self, path) -> Path:
        path = Path(path)
        path.write_text("".join(f"{k} = {fmt(v)}\n" for k, v in self.as_dict().items()), encoding="utf-8")
        return path


def force_l2_squared(sys: FemSystem, data, grid) -> float:
    """``||f||^2`` in L2(0,T; L2(Omega)) by composite trapezoid with one-sided limits at the switch-off."""
    f = np.asarray(data.force.vector, dtype=float)
    per_time = float(f @ f) * sys.volume
    t = grid.times
    on = np.array([data.force.active_on(t[k], t[k + 1]) for k in range(grid.steps)])
    return per_time * grid.dt * float(on.sum())


def gronwall_b(sys: FemSystem, data, grid, c0: float) -> float:
    """``max{1/2, rho, c0 ce2/2} (|u1|^2 + |f|^2 + \\int A e(u0):e(u0))`` with discrete norms."""
    _, ce2 = positive_definiteness_constants(sys.material)
    pref = max(0.5, sys.material.rho, c0 * ce2 / 2.0)
    data_terms = (
        float(data.u1 @ (sys.GramL2 @ data.u1))
        + force_l2_squared(sys, data, grid)
        + float(data.u0 @ (sys.K @ data.u0))
    )
    return pref * data_terms


def gronwall_rhs(b: float, t: float) -> float:
    """Right-hand side ``t b e^t`` of the a-priori bound on the time-integrated energies."""
    return t * b * math.exp(t)


def violation_bound(kappa: float, T: float, b: float) -> float:
    """``sqrt(kappa T b e^T)``."""
    return math.sqrt(kappa * T * b * math.exp(T))


def smallness_check(p: MaterialParams, c0: float) -> tuple[float, float, bool]:
    ce1, ce2 = positive_definiteness_constants(p)
    _, maxB = max_tensor_component(p)
    lhs = p.rho / (ce1 * maxB)
    rhs = 1.0 / (2.0 * c0**2 * ce2)
    return lhs, rhs, lhs <= rhs


def equivalence_factors(p: MaterialParams, c0: float, eps: float) -> tuple[float, float]:
    """Lower/upper factors between the energy and the modified energy."""
    ce1, _ = positive_definiteness_constants(p)
    k = eps * p.rho * c0**2 * ce1
    return min(1 - eps / 2, 1 - k), max(1 + eps / 2, 1 + k)


def decay_constants(p: MaterialParams, c0: float) -> dict:
    """eta, epsilon (midpoint of its admissible range), c_d and the C-tilde factor.

    Raises SmallnessError when the smallness condition fails.
    """
    lhs, rhs, holds = smallness_check(p, c0)
    if not holds:
        raise SmallnessError(lhs, rhs)
    ce1, ce2 = positive_definiteness_constants(p)
    _, maxB = max_tensor_component(p)
    eta = 2.0 * ce1 * maxB
    eps = 0.5 * min(1.0 / (ce1 * maxB), 2.0, 1.0 / (p.rho * c0**2 * ce1))
    lo, hi = equivalence_factors(p, c0, eps)
    c_d = min(1.0 / (2 * ce2 * c0**2) - p.rho / (ce1 * maxB), 1.0 / (2 * ce1 * maxB)) / hi
    c_tilde = hi / (min(1.0 / (2 * c0**2 * ce1), p.rho) * lo)
    return {"eta": eta, "epsilon": eps, "c_d": c_d, "C_tilde_factor": c_tilde}


def constants_report(p: MaterialParams, c0: float, b: float) -> ConstantsReport:
    ce1, ce2 = positive_definiteness_constants(p)
    maxA, maxB = max_tensor_component(p)
    lhs, rhs, holds = smallness_check(p, c0)
    dec = decay_constants(p, c0) if holds else dict.fromkeys(("eta", "epsilon", "c_d", "C_tilde_factor"), math.nan)
    return ConstantsReport(c0, ce1, ce2, maxA, maxB, b, lhs, rhs, holds, **dec)


def modified_energy(sys: FemSystem, trace: EnergyTrace, U, V, eps: float) -> np.ndarray:
    """``E + eps rho \\int v.u`` at each step."""
    cross = np.einsum("ij,ij->i", V, (sys.GramL2 @ U.T).T)
    return trace.mechanical + eps * sys.material.rho * cross


def discrete_norms(sys: FemSystem, U, V) -> tuple[np.ndarray, np.ndarray]:
    """``||u||_{H1}`` and ``||v||_{L2}`` per step."""
    nu = np.sqrt(np.einsum("ij,ij->i", U, (sys.GramH1 @ U.T).T))
    nv = np.sqrt(np.einsum("ij,ij->i", V, (sys.GramL2 @ V.T).T))
    return nu, nv


# --------------------------------------------------------------------- fits


def fit_decay_rate(t, E, T0: float, T: float) -> tuple[float, float]:
    """Least-squares decay constant of ``log E`` on ``[T0 + 0.1 (T - T0), T]``; returns (rate, r^2)."""
    t = np.asarray(t, dtype=float)
    E = np.asarray(E, dtype=float)
    start = T0 + 0.1 * (T - T0)
    # snap to grid so that a window edge on a grid point is not lost to rounding
    mask = (t >= start - 1e-9 * max(1.0, abs(start))) & (t <= T + 1e-9 * max(1.0, abs(T)))
    if mask.sum() < 2:
        raise FitError("fewer than two samples in the fit window")
    if np.any(E[mask] <= 0):
        raise FitError("nonpositive energy in the fit window")
    x, y = t[mask], np.log(E[mask])
    A = np.column_stack([x, np.ones_like(x)])
    (slope, icpt), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - (slope * x + icpt)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(resid @ resid) / ss_tot if ss_tot > 0 else 1.0
    return float(-slope), r2


def loglog_slope(x, y) -> float:
    """Least-squares slope of log y against log x."""
    lx, ly = np.log(np.asarray(x, dtype=float)), np.log(np.asarray(y, dtype=float))
    return float(np.polyfit(lx, ly, 1)[0])


# ------------------------------------------------------ variational inequality


@dataclass(frozen=True)
class TestField:
    name: str
    values: np.ndarray  # (steps+1, n)
    rates: np.ndarray  # time derivative, same shape


@dataclass
class VIResult:
    residuals: dict  # admissible member name -> residual
    rejected: dict  # inadmissible member name -> first violating vertex
    identity: float  # residual with the trajectory itself as test field
    scale: float

    @property
    def minimum(self) -> float:
        return min(self.residuals.values())

    @property
    def worst(self) -> str:
        return min(self.residuals, key=self.residuals.get)


class InadmissibleTestField(ValueError):
    def __init__(self, name, vertex):
        super().__init__(f"test field {name!r} violates the constraint at vertex {vertex}")
        self.vertex = vertex


def _trap_weights(n_points: int, dt: float) -> np.ndarray:
    w = np.full(n_points, dt)
    w[0] = w[-1] = 0.5 * dt
    return w


def _rowdot(X, Y) -> np.ndarray:
    return np.einsum("ij,ij->i", X, Y)


def vi_residual_single(traj, sys: FemSystem, field: TestField) -> float:
    """LHS - RHS of the hyperbolic variational inequality for one test field.

    All time integrals use the composite trapezoid; the body-force integral
    uses one-sided limits so that the switch-off is integrated exactly.
    """
    U, Vel = traj.U, traj.V
    W, Wdot = field.values, field.rates
    dt = traj.grid.dt
    w = _trap_weights(len(U), dt)
    M, K, C = sys.M, sys.K, sys.C
    u0, u1 = traj.data.u0, traj.data.u1
    D = W - U
    res = float(Vel[-1] @ (M @ D[-1])) - float(u1 @ (M @ (W[0] - u0)))
    res -= float(w @ _rowdot((M @ Vel.T).T, Wdot - Vel))
    res += float(w @ _rowdot((K @ U.T).T, D))
    res += float(w @ _rowdot((C @ Vel.T).T, W))
    res += -0.5 * float(U[-1] @ (C @ U[-1])) + 0.5 * float(u0 @ (C @ u0))
    unit = traj.load_unit
    if np.any(unit):
        t = traj.times
        on = np.array([traj.data.force.active_on(t[k], t[k + 1]) for k in range(len(t) - 1)], dtype=float)
        fd = D @ unit
        res -= float(np.sum(on * 0.5 * dt * (fd[:-1] + fd[1:])))
    return res


def first_violation(sys: FemSystem, values, tol: float = 1e-12):
    """Vertex id of the first constraint violation along a field history, or None."""
    gaps = sys.contact.rest_gap[None, :] + (sys.contact.trace @ np.atleast_2d(values).T).T
    bad = np.argwhere(gaps < -tol)
    return None if len(bad) == 0 else int(sys.contact.vertices[bad[0, 1]])


def default_test_family(traj, sys: FemSystem) -> list[TestField]:
    """u0; the trajectory; static q-aligned lifts/bubbles; the same with a smooth ramp in time."""
    mesh = sys.mesh
    n_t = len(traj.times)
    u0 = traj.data.u0
    x = mesh.vertices
    lo, hi = (np.asarray(b, dtype=float) for b in mesh.bounds)
    rel = (x - lo) / (hi - lo)
    # distance from the clamped face, normalized to [0, 1]
    clamped = x[mesh.dirichlet_vertices()]
    axis = int(np.argmin(np.ptp(clamped, axis=0)))
    plane = clamped[0, axis]
    lift = np.abs(x[:, axis] - plane) / (hi[axis] - lo[axis])
    bubble = 64.0 * np.prod(rel * (1.0 - rel), axis=1)
    T = traj.times[-1]
    ramp = 0.5 * (1.0 - np.cos(np.pi * traj.times / T))
    ramp_rate = 0.5 * np.pi / T * np.sin(np.pi * traj.times / T)

    zeros = np.zeros_like(traj.U)
    fields = [
        TestField("u0", np.tile(u0, (n_t, 1)), zeros),
        TestField("trajectory", traj.U, traj.V),
    ]
    for shape_name, phi in (("lift", lift), ("bubble", bubble)):
        g = sys.dofs.restrict(phi[:, None] * sys.hs.q[None, :])
        for s in (0.1, 0.5):
            fields.append(TestField(f"{shape_name}_s{s}", np.tile(u0 + s * g, (n_t, 1)), zeros))
            fields.append(
                TestField(f"ramp_{shape_name}_s{s}", u0[None, :] + np.outer(ramp, s * g), np.outer(ramp_rate, s * g))
            )
    return fields


def vi_scale(traj, sys: FemSystem) -> float:
    """``E(0) + ||f||_{L2(0,T;L2)} T``."""
    return float(traj.energy.mechanical[0]) + math.sqrt(force_l2_squared(sys, traj.data, traj.grid)) * traj.grid.T


def vi_residual(traj, sys: FemSystem, family=None) -> VIResult:
    """Evaluate the inequality over a family of admissible test fields.

    With ``family=None`` the built-in family is used; members that are not
    admissible (notably the trajectory itself whenever it penetrates at
    finite kappa) are set aside and only the identity value is kept. A
    user-supplied inadmissible field raises InadmissibleTestField.
    """
    builtin = family is None
    fields = default_test_family(traj, sys) if builtin else list(family)
    residuals, rejected = {}, {}
    identity = vi_residual_single(traj, sys, TestField("trajectory", traj.U, traj.V))
    for fld in fields:
        vertex = first_violation(sys, fld.values)
        if vertex is not None:
            if not builtin:
                raise InadmissibleTestField(fld.name, vertex)
            rejected[fld.name] = vertex
            continue
        residuals[fld.name] = vi_residual_single(traj, sys, fld)
    return VIResult(residuals, rejected, identity, vi_scale(traj, sys))
