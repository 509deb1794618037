"""Experiment drivers: single run, kappa sweep, refinement, decay study, constants, VI check.

Every driver writes into its own output directory and returns a small summary
dict. Numbers are serialized with the shortest round-trip repr so that equal
inputs give byte-identical files.
"""

from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import analysis as an
from .assembly import FemSystem, assemble, estimate_korn_constant
from .config import ConfigError, SimConfig
from .dynamics import ForceSpec, ProblemData, TimeGrid, Trajectory, simulate
from .geometry import HalfSpace, make_box_mesh
from .vtk import write_vtk

log = logging.getLogger(__name__)

SWEEP_COLUMNS = ("kappa", "max_violation_l2", "mean_violation_l2", "violation_bound", "max_pressure")
REFINE_COLUMNS = ("level", "nx", "ny", "nz", "dofs", "E_total_T", "u_H1_T", "v_L2_T", "diff_prev", "ratio")
DECAY_COLUMNS = ("t", "E_kappa", "E_bound", "E_fit", "norm", "norm_bound")
VI_COLUMNS = ("kappa", "member", "residual", "admissible")


@dataclass
class Setup:
    sys: FemSystem
    data: ProblemData
    grid: TimeGrid


def _write_rows(path: Path, header, rows) -> Path:
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([v if isinstance(v, str) else an.fmt(v) for v in r])
    return path


def _nodal_file(path: str, key: str, sys: FemSystem) -> np.ndarray:
    try:
        arr = np.load(path)
    except (OSError, ValueError) as exc:
        raise ConfigError(key, f"cannot load {path!r}: {exc}") from exc
    nv = sys.mesh.n_vertices
    if arr.shape not in ((nv, 3), (3 * nv,)):
        raise ConfigError(key, f"expected shape ({nv}, 3), got {arr.shape}")
    full = np.asarray(arr, dtype=float).reshape(nv, 3)
    if np.any(full.ravel()[np.setdiff1d(np.arange(3 * nv), sys.dofs.free)] != 0):
        raise ConfigError(key, "nonzero values on clamped vertices")
    return sys.dofs.restrict(full)


def build(cfg: SimConfig, subdivisions=None) -> Setup:
    mesh = make_box_mesh(cfg.lower, cfg.upper, subdivisions or cfg.subdivisions, cfg.dirichlet_face)
    sys = assemble(mesh, cfg.material, hs=HalfSpace(cfg.normal))
    force = ForceSpec(tuple(cfg.force), cfg.force_until)
    if cfg.initial_displacement == "offset":
        data = ProblemData.offset(sys, cfg.initial_offset, force)
    elif cfg.initial_displacement == "file":
        data = ProblemData(_nodal_file(cfg.initial_file, "initial.file", sys), np.zeros(sys.n), force)
    else:
        data = ProblemData.zero(sys, force)
    if cfg.initial_velocity == "file":
        data = ProblemData(data.u0, _nodal_file(cfg.initial_velocity_file, "initial.velocity_file", sys), force)
    return Setup(sys, data, TimeGrid(cfg.T, cfg.dt, cfg.T0))


def _constants(setup: Setup, seed: int) -> an.ConstantsReport:
    c0 = estimate_korn_constant(setup.sys, seed=seed)
    b = an.gronwall_b(setup.sys, setup.data, setup.grid, c0)
    return an.constants_report(setup.sys.material, c0, b)


def _write_run(setup: Setup, traj: Trajectory, out: Path) -> None:
    traj.energy.write_csv(out / "trajectory.csv")
    write_vtk(out / "final_state.vtk", setup.sys.mesh, setup.sys.dofs.to_full(traj.U[-1]))


# ------------------------------------------------------------------ simulate


def run_simulate(cfg: SimConfig, out, seed: int | None = None) -> dict:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    setup = build(cfg)
    setup.data.check_admissible(setup.sys)
    report = _constants(setup, cfg.seed if seed is None else seed)
    report.write(out / "constants.txt")
    traj = simulate(setup.sys, setup.data, setup.grid, cfg.kappa)
    _write_run(setup, traj, out)
    return {"steps": setup.grid.steps, "dir": str(out), "max_violation_l2": float(traj.energy.column("violation_l2").max())}


# ------------------------------------------------------------------- kappa sweep


def _sweep_member(cfg: SimConfig, kappa: float, out: str) -> dict:
    setup = build(cfg)
    traj = simulate(setup.sys, setup.data, setup.grid, kappa)
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    _write_run(setup, traj, out)
    viol = traj.energy.column("violation_l2")
    w = np.full(len(viol), setup.grid.dt)
    w[0] = w[-1] = 0.5 * setup.grid.dt
    return {
        "kappa": kappa,
        "max_violation_l2": float(viol.max()),
        "mean_violation_l2": float(w @ viol) / setup.grid.T,
        "max_pressure": float(traj.energy.column("max_pressure").max()),
    }


def _map(fn, args, jobs: int):
    """Run ``fn(*a)`` for each a; results in input order. Failures are returned as exceptions."""
    results = []
    if jobs <= 1:
        for a in args:
            try:
                results.append(fn(*a))
            except Exception as exc:  # noqa: BLE001 - collected and re-raised by the caller
                results.append(exc)
        return results
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        futures = [pool.submit(fn, *a) for a in args]
        for f in futures:
            try:
                results.append(f.result())
            except Exception as exc:  # noqa: BLE001
                results.append(exc)
    return results


def _first_error(results):
    return next((r for r in results if isinstance(r, Exception)), None)


def member_dir(prefix: str, value) -> str:
    return f"{prefix}_{value!r}" if isinstance(value, float) else f"{prefix}_{value}"


def run_sweep_kappa(cfg: SimConfig, out, jobs: int = 1, seed: int | None = None) -> dict:
    kappas = sorted(cfg.kappa_sweep, reverse=True)
    if len(kappas) < 3:
        raise ConfigError("penalty.sweep", "need at least 3 values")
    if kappas[0] / kappas[-1] < 100 * (1 - 1e-12):
        raise ConfigError("penalty.sweep", "values must span at least two decades")
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    setup = build(cfg)
    setup.data.check_admissible(setup.sys)
    report = _constants(setup, cfg.seed if seed is None else seed)
    report.write(out / "constants.txt")
    results = _map(_sweep_member, [(cfg, k, str(out / member_dir("kappa", k))) for k in kappas], jobs)
    rows = []
    for r in results:
        if isinstance(r, dict):
            r["violation_bound"] = an.violation_bound(r["kappa"], cfg.T, report.b)
            rows.append(r)
    table = [[r[c] for c in SWEEP_COLUMNS] for r in rows]
    err = _first_error(results)
    slope = an.loglog_slope([r["kappa"] for r in rows], [r["max_violation_l2"] for r in rows]) if len(rows) >= 2 else math.nan
    if err is None:
        table.append(["slope", slope, "", "", ""])
    _write_rows(out / "sweep_summary.csv", SWEEP_COLUMNS, table)
    if err is not None:
        raise err
    return {"rows": rows, "slope": slope, "b": report.b}


# ------------------------------------------------------------------ refinement


def _refine_member(cfg: SimConfig, subdivisions: tuple, out: str) -> dict:
    setup = build(cfg, subdivisions)
    traj = simulate(setup.sys, setup.data, setup.grid, cfg.kappa)
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    _write_run(setup, traj, out)
    nu, nv = an.discrete_norms(setup.sys, traj.U[-1:], traj.V[-1:])
    return {
        "dofs": setup.sys.n,
        "E_total_T": float(traj.energy.column("E_total")[-1]),
        "u_H1_T": float(nu[0]),
        "v_L2_T": float(nv[0]),
        "vertices": setup.sys.mesh.vertices,
        "u_T": setup.sys.dofs.to_full(traj.U[-1]),
    }


def _coarse_difference(cfg: SimConfig, coarse_sub, coarse: dict, fine: dict) -> float:
    """L2 norm on the coarse mesh of (fine - coarse) sampled at the coarse vertices."""
    span = np.asarray(cfg.upper) - np.asarray(cfg.lower)
    key = lambda x: tuple(np.rint((x - cfg.lower) / span * 2**20).astype(np.int64))  # noqa: E731
    lookup = {key(x): i for i, x in enumerate(fine["vertices"])}
    idx = np.array([lookup[key(x)] for x in coarse["vertices"]])
    d = fine["u_T"][idx] - coarse["u_T"]
    sys = build(cfg, coarse_sub).sys
    df = sys.dofs.restrict(d)
    return float(np.sqrt(df @ (sys.GramL2 @ df)))


def run_refinement(cfg: SimConfig, out, jobs: int = 1) -> dict:
    levels = list(cfg.refine_levels)
    if len(levels) < 3:
        raise ConfigError("refine.levels", "need at least 3 levels")
    for a, b in zip(levels, levels[1:]):
        if any(nb % na or nb <= na for na, nb in zip(a, b)):
            raise ConfigError("refine.levels", f"{b} is not a nested refinement of {a}")
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    name = lambda s: "level_" + "x".join(map(str, s))  # noqa: E731
    results = _map(_refine_member, [(cfg, tuple(s), str(out / name(s))) for s in levels], jobs)
    rows, prev_diff = [], math.nan
    for i, (sub, r) in enumerate(zip(levels, results)):
        if isinstance(r, Exception):
            break
        diff = ratio = math.nan
        if i > 0 and not isinstance(results[i - 1], Exception):
            diff = _coarse_difference(cfg, levels[i - 1], results[i - 1], r)
            ratio = diff / prev_diff if i > 1 else math.nan
        prev_diff = diff
        rows.append([i, *sub, r["dofs"], r["E_total_T"], r["u_H1_T"], r["v_L2_T"], diff, ratio])
    _write_rows(out / "refinement_summary.csv", REFINE_COLUMNS, rows)
    err = _first_error(results)
    if err is not None:
        raise err
    return {"rows": [dict(zip(REFINE_COLUMNS, r)) for r in rows]}


# ----------------------------------------------------------------------- decay


def decay_curves(t, E, norm, T0: float, report: an.ConstantsReport, p) -> dict:
    """Energy and norm bounds from the decay estimate, and the least-squares fit, for t >= T0."""
    k0 = int(np.searchsorted(t, T0 - 1e-9 * max(1.0, T0)))
    lo, hi = an.equivalence_factors(p, report.c0, report.epsilon)
    rate, r2 = an.fit_decay_rate(t, E, T0, t[-1])
    ts = t[k0:]
    E0 = float(E[k0])
    window = ts >= T0 + 0.1 * (t[-1] - T0) - 1e-9
    icpt = float(np.mean(np.log(E[k0:][window]) + rate * ts[window]))
    return {
        "index": k0,
        "t": ts,
        "E_kappa": E[k0:],
        "E_bound": hi / lo * E0 * np.exp(-report.c_d * (ts - T0)),
        "E_fit": np.exp(icpt - rate * ts),
        "norm": norm[k0:],
        "norm_bound": np.sqrt(report.C_tilde_factor * E0) * np.exp(-0.5 * report.c_d * (ts - T0)),
        "rate": rate,
        "r2": r2,
    }


def run_decay(cfg: SimConfig, out, seed: int | None = None) -> dict:
    if cfg.T0 is None:
        raise ConfigError("time.T0", "required for the decay study")
    if cfg.force_until is None or cfg.force_until > cfg.T0:
        raise ConfigError("force.until", "the force must be off after time.T0")
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    setup = build(cfg)
    setup.data.check_admissible(setup.sys)
    report = _constants(setup, cfg.seed if seed is None else seed)
    report.write(out / "constants.txt")
    if not report.smallness_holds:
        (out / "decay_report.txt").write_text(
            f"status = refused\nsmallness_lhs = {an.fmt(report.smallness_lhs)}\nsmallness_rhs = {an.fmt(report.smallness_rhs)}\n",
            encoding="utf-8",
        )
        raise an.SmallnessError(report.smallness_lhs, report.smallness_rhs)
    traj = simulate(setup.sys, setup.data, setup.grid, cfg.kappa)
    _write_run(setup, traj, out)
    nu, nv = an.discrete_norms(setup.sys, traj.U, traj.V)
    cur = decay_curves(traj.times, traj.energy.mechanical, nu + nv, cfg.T0, report, setup.sys.material)
    norm_fail = int(np.sum(cur["norm"] > cur["norm_bound"]))
    energy_fail = int(np.sum(cur["E_kappa"] > cur["E_bound"]))
    _write_rows(out / "decay_curves.csv", DECAY_COLUMNS, zip(*(cur[c] for c in DECAY_COLUMNS)))
    lines = [f"{k} = {an.fmt(v)}" for k, v in report.as_dict().items()]
    lines += [
        "status = ok",
        f"fitted_rate = {an.fmt(cur['rate'])}",
        f"r2 = {an.fmt(cur['r2'])}",
        f"points_checked = {len(cur['t'])}",
        f"norm_bound_violations = {norm_fail}",
        f"energy_bound_violations = {energy_fail}",
        f"max_norm_ratio = {an.fmt(float(np.max(cur['norm'] / cur['norm_bound'])))}",
    ]
    (out / "decay_report.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return {"report": report, "rate": cur["rate"], "r2": cur["r2"], "norm_bound_violations": norm_fail, "energy_bound_violations": energy_fail, "curves": cur}


# ------------------------------------------------------------------- constants


def run_constants(cfg: SimConfig, out, seed: int | None = None) -> an.ConstantsReport:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    report = _constants(build(cfg), cfg.seed if seed is None else seed)
    report.write(out / "constants.txt")
    return report


# -------------------------------------------------------------------- VI check


def _vi_member(cfg: SimConfig, kappa: float, out: str) -> dict:
    setup = build(cfg)
    traj = simulate(setup.sys, setup.data, setup.grid, kappa)
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    _write_run(setup, traj, out)
    res = an.vi_residual(traj, setup.sys)
    return {"kappa": kappa, "residuals": res.residuals, "rejected": res.rejected, "identity": res.identity, "scale": res.scale}


def run_vi_check(cfg: SimConfig, out, jobs: int = 1) -> dict:
    """VI residuals over the built-in family at ``penalty.kappa`` and every ``penalty.sweep`` value."""
    kappas = sorted(set(cfg.kappa_sweep) | {cfg.kappa}, reverse=True)
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    setup = build(cfg)
    setup.data.check_admissible(setup.sys)
    results = _map(_vi_member, [(cfg, k, str(out / member_dir("kappa", k))) for k in kappas], jobs)
    rows, summary = [], []
    for r in results:
        if isinstance(r, Exception):
            continue
        for name, val in r["residuals"].items():
            rows.append([r["kappa"], name, val, True])
        for name in r["rejected"]:
            rows.append([r["kappa"], name, math.nan, False])
        rows.append([r["kappa"], "identity", r["identity"], False])
        summary.append(r)
    _write_rows(out / "vi_residuals.csv", VI_COLUMNS, rows)
    _write_rows(
        out / "vi_summary.csv",
        ("kappa", "min_residual", "worst_member", "tolerance"),
        [[r["kappa"], min(r["residuals"].values()), min(r["residuals"], key=r["residuals"].get), -1e-3 * r["scale"]] for r in summary],
    )
    err = _first_error(results)
    if err is not None:
        raise err
    return {"members": summary}
