"""Negative-part penalty for the half-space constraint on the contact boundary."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .assembly import ContactTable


def negative_part(x):
    """``{x}^- = -min(x, 0)``; elementwise for arrays."""
    out = -np.minimum(x, 0.0)
    return out + 0.0 if np.ndim(out) else float(out) + 0.0  # + 0.0 folds -0.0 into 0.0


@dataclass(frozen=True)
class PenaltyState:
    kappa: float
    gap: np.ndarray  # deformed gap per contact vertex
    active: np.ndarray  # bool mask, gap < 0
    violation_sq: float  # squared L2(Gamma) norm of {gap}^-
    pressure: np.ndarray  # {gap}^- / kappa

    @property
    def violation_l2(self) -> float:
        return float(np.sqrt(self.violation_sq))

    @property
    def active_set(self) -> np.ndarray:
        return np.flatnonzero(self.active)

    @property
    def min_gap(self) -> float:
        return float(self.gap.min()) if len(self.gap) else np.inf

    @property
    def max_pressure(self) -> float:
        return float(self.pressure.max()) if len(self.pressure) else 0.0


def penalty_state(table: ContactTable, u, kappa: float) -> PenaltyState:
    if not kappa > 0:
        raise ValueError(f"kappa must be positive, got {kappa!r}")
    gap = table.gaps(u)
    neg = negative_part(gap)
    return PenaltyState(
        kappa=kappa,
        gap=gap,
        active=gap < 0.0,
        violation_sq=float(np.sum(table.weights * neg**2)),
        pressure=neg / kappa,
    )


def penalty_residual(table: ContactTable, u, kappa: float) -> tuple[np.ndarray, PenaltyState]:
    """Force ``(1/kappa) w {g}^- q`` on free dofs; it pushes violating vertices back along +q."""
    state = penalty_state(table, u, kappa)
    force = table.trace.T @ (table.weights * state.pressure)
    return np.asarray(force), state


def penalty_jacobian(table: ContactTable, active, kappa: float) -> sp.csr_matrix:
    """Generalized derivative of minus the penalty force: ``(1/kappa) w q (x) q`` on active vertices.

    Vertices exactly at zero gap are treated as inactive.
    """
    d = np.where(np.asarray(active, dtype=bool), table.weights / kappa, 0.0)
    return (table.trace.T @ sp.diags(d) @ table.trace).tocsr()


def penalty_energy(state: PenaltyState) -> float:
    """``(1/(2 kappa)) |{g}^-|^2_{L2(Gamma)}`` by nodal quadrature."""
    return state.violation_sq / (2.0 * state.kappa)
