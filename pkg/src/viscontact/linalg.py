"""Sparse solves and extreme generalized eigenvalues of symmetric pencils."""

from __future__ import annotations

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

# above this size the direct factorization is replaced by Jacobi-preconditioned CG
DIRECT_SOLVE_LIMIT = 20_000


class ConvergenceError(RuntimeError):
    """An iterative method hit its iteration cap."""


def pcg(A, b, x0=None, rtol: float = 1e-12, maxiter: int | None = None):
    """Conjugate gradients with diagonal (Jacobi) preconditioning, via scipy.

    Returns ``(x, iterations)``. Raises ConvergenceError when
    ``|r| <= rtol*|b|`` is not reached within ``maxiter`` iterations.
    """
    A = sp.csr_matrix(A)
    b = np.asarray(b, dtype=float)
    diag = A.diagonal()
    if np.any(diag <= 0):
        raise ValueError("Jacobi preconditioner needs a positive diagonal")
    maxiter = maxiter or 10 * len(b)
    count = [0]

    def tick(_):
        count[0] += 1

    x, info = spla.cg(A, b, x0=x0, rtol=rtol, atol=0.0, maxiter=maxiter, M=sp.diags(1.0 / diag), callback=tick)
    if info > 0:
        r = np.linalg.norm(b - A @ x)
        raise ConvergenceError(f"pcg: residual {r:.3e} > {rtol * np.linalg.norm(b):.3e} after {maxiter} iterations")
    return x, count[0]


class SymmetricSolver:
    """Reusable solver for one SPD matrix: sparse LU when small, PCG otherwise."""

    def __init__(self, A, rtol: float = 1e-12):
        self.A = sp.csc_matrix(A)
        self.rtol = rtol
        self._lu = spla.splu(self.A) if self.A.shape[0] <= DIRECT_SOLVE_LIMIT else None

    def __call__(self, b):
        if self._lu is not None:
            return self._lu.solve(np.asarray(b, dtype=float))
        return pcg(self.A, b, rtol=self.rtol)[0]


def _b_orthonormalize(X, B):
    G = X.T @ (B @ X)
    L = np.linalg.cholesky(0.5 * (G + G.T))
    return np.linalg.solve(L, X.T).T


def extreme_generalized_eigenvalue(
    A,
    B,
    which: str = "smallest",
    shift: float = 0.0,
    tol: float = 1e-8,
    block: int = 4,
    maxiter: int = 5000,
    seed: int = 0,
) -> float:
    """Extreme eigenvalue of ``A x = sigma B x`` for symmetric A, B with B SPD.

    ``which="smallest"`` runs shifted inverse iteration ``x <- (A - shift B)^-1 B x``;
    ``which="largest"`` runs forward iteration ``x <- B^-1 A x``. Both iterate a
    small block with Rayleigh-Ritz so that (near-)degenerate extreme eigenvalues
    do not stall the iteration. Stops when the Ritz value changes by less than
    ``tol`` relative between sweeps.
    """
    A = sp.csr_matrix(A)
    B = sp.csr_matrix(B)
    n = A.shape[0]
    block = max(1, min(block, n))
    rng = np.random.default_rng(seed)
    X = _b_orthonormalize(rng.standard_normal((n, block)), B)
    if which == "smallest":
        solve = SymmetricSolver(A - shift * B)
        apply = lambda X: np.column_stack([solve(B @ x) for x in X.T])  # noqa: E731
    elif which == "largest":
        solve = SymmetricSolver(B)
        apply = lambda X: np.column_stack([solve(A @ x) for x in X.T])  # noqa: E731
    else:
        raise ValueError(f"which must be 'smallest' or 'largest', got {which!r}")

    previous = np.inf
    for _ in range(maxiter):
        X = _b_orthonormalize(apply(X), B)
        ritz, vecs = sla.eigh(X.T @ (A @ X), X.T @ (B @ X))
        X = X @ vecs
        value = ritz[0] if which == "smallest" else ritz[-1]
        if abs(value - previous) <= tol * abs(value):
            return float(value)
        previous = value
    raise ConvergenceError(f"eigen-iteration did not settle within {maxiter} sweeps (last {previous!r})")
