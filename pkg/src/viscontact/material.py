"""Isotropic elasticity and viscosity tensors acting on symmetric strains.

Symmetric 3x3 tensors are stored in Voigt order (11, 22, 33, 23, 13, 12) with
*tensor* (not engineering) shear components, so a double contraction reads
``s:t = sum(s[:3]*t[:3]) + 2*sum(s[3:]*t[3:])``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

VOIGT_PAIRS = ((0, 0), (1, 1), (2, 2), (1, 2), (0, 2), (0, 1))
# weights turning a Voigt dot product into the full double contraction
VOIGT_WEIGHTS = np.array([1.0, 1.0, 1.0, 2.0, 2.0, 2.0])


@dataclass(frozen=True)
class MaterialParams:
    """Lamé constants, viscosity constants and mass density."""

    lam: float
    mu: float
    theta: float
    xi: float
    rho: float

    def __post_init__(self):
        checks = [
            ("lambda", self.lam, self.lam >= 0),
            ("mu", self.mu, self.mu > 0),
            ("theta", self.theta, self.theta >= 0),
            ("xi", self.xi, self.xi > 0),
            ("rho", self.rho, self.rho > 0),
        ]
        for name, value, ok in checks:
            if not (ok and np.isfinite(value)):
                raise ValueError(f"invalid material constant {name}={value!r}")


class SymTensor2(np.ndarray):
    """Six-component symmetric tensor (Voigt order). Thin ndarray view."""

    def __new__(cls, components):
        arr = np.asarray(components, dtype=float)
        if arr.shape[-1] != 6:
            raise ValueError("symmetric tensor needs 6 Voigt components")
        return arr.view(cls)

    @classmethod
    def from_matrix(cls, m) -> "SymTensor2":
        m = np.asarray(m, dtype=float)
        return cls([m[i, j] for i, j in VOIGT_PAIRS])

    def to_matrix(self) -> np.ndarray:
        out = np.empty((3, 3))
        for k, (i, j) in enumerate(VOIGT_PAIRS):
            out[i, j] = out[j, i] = self[k]
        return out


def trace(e) -> np.ndarray:
    e = np.asarray(e)
    return e[..., 0] + e[..., 1] + e[..., 2]


def contract(s, t) -> np.ndarray:
    """Double contraction ``s:t`` of Voigt-stored symmetric tensors."""
    return np.sum(np.asarray(s) * np.asarray(t) * VOIGT_WEIGHTS, axis=-1)


def _isotropic_apply(first: float, second: float, e) -> SymTensor2:
    e = np.asarray(e, dtype=float)
    out = 2.0 * second * e
    out[..., :3] += first * trace(e)[..., None]
    return SymTensor2(out)


def elasticity_apply(p: MaterialParams, e) -> SymTensor2:
    """``sigma = lambda tr(e) I + 2 mu e``."""
    return _isotropic_apply(p.lam, p.mu, e)


def viscosity_apply(p: MaterialParams, e) -> SymTensor2:
    """``sigma = theta tr(e) I + 2 xi e``."""
    return _isotropic_apply(p.theta, p.xi, e)


def voigt_matrix(first: float, second: float) -> np.ndarray:
    """6x6 matrix D with ``(D e) . (w*t) == (C e):t`` for the isotropic tensor C.

    The weighting by VOIGT_WEIGHTS is folded in, so ``t @ D @ e`` is the
    bilinear form ``C e : t`` directly.
    """
    d = np.zeros((6, 6))
    d[:3, :3] = first
    d += 2.0 * second * np.diag(VOIGT_WEIGHTS)
    return d


def positive_definiteness_constants(p: MaterialParams) -> tuple[float, float]:
    """Sharp constants with ``|t|^2 <= ce * (C t:t)`` for every symmetric t.

    Since ``C t:t = first*tr(t)^2 + 2*second*|t|^2`` and ``first >= 0``, the
    smallest admissible constant is ``1/(2*second)``, approached on trace-free t.
    """
    return 1.0 / (2.0 * p.mu), 1.0 / (2.0 * p.xi)


def max_tensor_component(p: MaterialParams) -> tuple[float, float]:
    """Largest absolute component of the elasticity and viscosity tensors."""
    # attained at index 1111; |first| + 2 second dominates every other entry
    return p.lam + 2.0 * p.mu, p.theta + 2.0 * p.xi
