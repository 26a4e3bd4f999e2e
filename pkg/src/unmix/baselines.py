"""Quadratic baselines: plain least squares, fully-constrained least squares,
and l1-regularized nonnegative least squares.

The constrained problems are solved per pixel by ADMM with a closed-form
quadratic update; the (2 M'M + rho I) factorization is computed once, is only
read afterwards, and is shared across all pixels and iterations (the per-pixel
solves are independent).
"""

from __future__ import annotations

import warnings
from typing import Optional

import numpy as np
import scipy.linalg

from .core import (
    AbundanceMatrix,
    InvalidInput,
    MaxItersWarning,
    ProblemHandle,
    SingularNormalEquations,
    SolverConfig,
    project_nonnegative,
    soft_threshold,
)

# Residual tolerance (per coordinate) and iteration cap of the baseline ADMM
# loops; tight enough that the outputs serve as 1e-6-level oracles.
_BASELINE_TOL = 1e-12
_BASELINE_MAX_ITERS = 30000


def solve_ls(handle: ProblemHandle) -> AbundanceMatrix:
    """Unconstrained least-squares abundances via an economy QR of M.

    Pixels are solved one column at a time through a single code path, so
    solving the matrix problem and solving pixel by pixel give bit-identical
    results.
    """
    Q, Rfac = scipy.linalg.qr(handle.M, mode="economic")
    diag = np.abs(np.diag(Rfac))
    if diag.min() <= diag.max() * 1e-13:
        raise SingularNormalEquations("M'M is numerically singular")
    Qt = np.ascontiguousarray(Q.T)
    X = np.empty((handle.R, handle.T))
    for t in range(handle.T):
        qty = Qt @ np.ascontiguousarray(handle.Y[:, t])
        X[:, t] = scipy.linalg.solve_triangular(Rfac, qty, check_finite=False)
    return AbundanceMatrix(X)


def _default_rho(MtM2: np.ndarray) -> float:
    # Mean curvature of the quadratic term keeps the fixed penalty on the same
    # scale as the data term across reflectance magnitudes.
    return float(np.trace(MtM2) / MtM2.shape[0])


def _resolve(config: Optional[SolverConfig], MtM2: np.ndarray):
    # A supplied config owns rho and the iteration cap; the residual tolerance
    # stays at oracle grade either way.
    if config is None:
        return _default_rho(MtM2), _BASELINE_MAX_ITERS
    return config.rho, config.max_outer_iters


def solve_fcls(handle: ProblemHandle, config: Optional[SolverConfig] = None) -> AbundanceMatrix:
    """Per-pixel least squares over the probability simplex.

    ADMM splitting: the quadratic-plus-sum-to-one update has a closed form via
    one KKT correction of the unconstrained solve; nonnegativity enters through
    projection. Returns the equality-exact iterate (column sums are 1 to
    rounding; entries can undershoot 0 only by the final primal residual).
    """
    M, Y = handle.M, handle.Y
    R, T = handle.R, handle.T
    MtM2 = 2.0 * (M.T @ M)
    rho, max_iters = _resolve(config, MtM2)
    try:
        cho = scipy.linalg.cho_factor(MtM2 + rho * np.eye(R))
    except scipy.linalg.LinAlgError as exc:  # pragma: no cover - SPD by construction
        raise SingularNormalEquations(str(exc)) from exc
    MtY2 = 2.0 * (M.T @ Y)
    q = scipy.linalg.cho_solve(cho, np.ones(R))
    qsum = float(q.sum())
    if abs(qsum) < 1e-300:
        raise SingularNormalEquations("sum-to-one correction is degenerate")

    Z = project_nonnegative(solve_ls(handle).data)
    U = np.zeros((R, T))
    X = Z
    eps_stop = np.sqrt(R * T) * _BASELINE_TOL
    converged = False
    for _ in range(max_iters):
        W = scipy.linalg.cho_solve(cho, MtY2 + rho * (Z + U), check_finite=False)
        nu = (W.sum(axis=0) - 1.0) / qsum
        X = W - np.outer(q, nu)
        Z_new = np.maximum(X - U, 0.0)
        U = U - (X - Z_new)
        primal = np.linalg.norm(X - Z_new)
        dual = rho * np.linalg.norm(Z_new - Z)
        Z = Z_new
        if primal <= eps_stop and dual <= eps_stop:
            converged = True
            break
    if not converged:
        warnings.warn("fully-constrained solve hit its iteration cap", MaxItersWarning, stacklevel=2)
    return AbundanceMatrix(X, tag="fully_constrained")


def solve_sunsal_sparse(
    handle: ProblemHandle, lam: float, config: Optional[SolverConfig] = None
) -> AbundanceMatrix:
    """Per-pixel minimizer of ||y - M x||^2 + lam * ||x||_1 subject to x >= 0.

    Same ADMM scaffold as solve_fcls without the sum-to-one correction; the
    proximal step is soft thresholding followed by projection. lam = 0 gives
    nonnegative least squares.
    """
    if not (np.isscalar(lam) and np.isfinite(lam) and lam >= 0):
        raise InvalidInput("lam must be a nonnegative finite scalar")
    M, Y = handle.M, handle.Y
    R, T = handle.R, handle.T
    MtM2 = 2.0 * (M.T @ M)
    rho, max_iters = _resolve(config, MtM2)
    try:
        cho = scipy.linalg.cho_factor(MtM2 + rho * np.eye(R))
    except scipy.linalg.LinAlgError as exc:  # pragma: no cover
        raise SingularNormalEquations(str(exc)) from exc
    MtY2 = 2.0 * (M.T @ Y)
    thresh = lam / rho

    Z = project_nonnegative(solve_ls(handle).data)
    U = np.zeros((R, T))
    eps_stop = np.sqrt(R * T) * _BASELINE_TOL
    converged = False
    for _ in range(max_iters):
        X = scipy.linalg.cho_solve(cho, MtY2 + rho * (Z + U), check_finite=False)
        Z_new = np.maximum(soft_threshold(X - U, thresh), 0.0)
        U = U - (X - Z_new)
        primal = np.linalg.norm(X - Z_new)
        dual = rho * np.linalg.norm(Z_new - Z)
        Z = Z_new
        if primal <= eps_stop and dual <= eps_stop:
            converged = True
            break
    if not converged:
        warnings.warn("sparse solve hit its iteration cap", MaxItersWarning, stacklevel=2)
    return AbundanceMatrix(Z, tag="nonnegative")
