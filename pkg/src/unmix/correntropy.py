"""Correntropy objective and exact gradients.

Both parameterizations are provided: the full abundance matrix (used by the
sparsity-promoting solver) and the reduced matrix with the last endmember row
eliminated through the sum-to-one constraint (used by the fully-constrained
solver).

Per-band residual energies are accumulated in 80-bit extended precision before
exponentiation so the band weights stay stable for large cubes. All reductions
go through numpy's fixed-tree pairwise summation: for a given array shape,
repeated evaluations are bit-identical.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import DimensionMismatch, InvalidInput, ProblemHandle, _as_matrix


@dataclass(frozen=True)
class ReducedAbundance:
    """Free abundances after eliminating the last row via the sum-to-one constraint.

    Holds the (R-1) x T matrix of free variables; the eliminated row is
    1 - (column sum), so reconstruction always yields unit column sums.
    """

    data: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "data", _as_matrix(self.data, what="reduced abundance matrix"))

    @property
    def pixel_count(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class ResidualCache:
    """Residuals Y - M X and the per-band Gaussian weights at one iterate."""

    eps: np.ndarray
    band_weights: np.ndarray


def reduce_abundances(X) -> ReducedAbundance:
    """Drop the last abundance row, keeping the R-1 free rows."""
    arr = np.asarray(X.data if hasattr(X, "data") else X, dtype=float)
    if arr.ndim != 2 or arr.shape[0] < 2:
        raise InvalidInput("need an R x T matrix with R >= 2 to eliminate one row")
    return ReducedAbundance(arr[:-1, :])


def reconstruct_full(Xr) -> np.ndarray:
    """Rebuild the full R x T matrix; the appended row makes every column sum to 1."""
    arr = np.asarray(Xr.data if isinstance(Xr, ReducedAbundance) else Xr, dtype=float)
    if arr.ndim != 2:
        raise InvalidInput("reduced abundances must be 2-D")
    last = 1.0 - arr.sum(axis=0)
    return np.vstack([arr, last[np.newaxis, :]])


def _check_shapes(handle: ProblemHandle, X: np.ndarray, reduced: bool) -> np.ndarray:
    arr = np.asarray(X.data if hasattr(X, "data") else X, dtype=float)
    rows = handle.R - 1 if reduced else handle.R
    if arr.shape != (rows, handle.T):
        raise DimensionMismatch(f"expected shape {(rows, handle.T)}, got {arr.shape}")
    return arr


def _check_sigma(sigma: float) -> float:
    if not (np.isscalar(sigma) and np.isfinite(sigma) and sigma > 0):
        raise InvalidInput("sigma must be a positive finite scalar")
    return float(sigma)


def _band_weights_of(eps: np.ndarray, sigma: float) -> np.ndarray:
    # Row-wise residual energy summed with a longdouble accumulator, then the
    # Gaussian factor; underflow to 0.0 is the intended saturation for bands
    # far outside the kernel width.
    s = np.sum(eps * eps, axis=1, dtype=np.longdouble)
    with np.errstate(under="ignore"):
        w = np.exp(-s / (2.0 * np.longdouble(sigma) ** 2))
    return w.astype(float)


def residual_cache(handle: ProblemHandle, X, sigma: float) -> ResidualCache:
    """Residuals and band weights at X; recomputed fresh on every call."""
    arr = _check_shapes(handle, X, reduced=False)
    sigma = _check_sigma(sigma)
    eps = handle.Y - handle.M @ arr
    return ResidualCache(eps=eps, band_weights=_band_weights_of(eps, sigma))


def band_weights(handle: ProblemHandle, X, sigma: float) -> np.ndarray:
    """Per-band weights in (0, 1]; bands the criterion has down-weighted show up small."""
    return residual_cache(handle, X, sigma).band_weights


def objective_C(handle: ProblemHandle, X, sigma: float) -> float:
    """Negative correntropy of the fit M X to Y; always in [-L, 0)."""
    return -float(np.sum(residual_cache(handle, X, sigma).band_weights))


def gradient_full(handle: ProblemHandle, X, sigma: float) -> np.ndarray:
    """Exact gradient of objective_C with respect to the full R x T matrix."""
    arr = _check_shapes(handle, X, reduced=False)
    sigma = _check_sigma(sigma)
    eps = handle.Y - handle.M @ arr
    w = _band_weights_of(eps, sigma)
    return -(1.0 / sigma**2) * (handle.M.T @ (w[:, np.newaxis] * eps))


def _reduced_system(handle: ProblemHandle):
    """Shifted system (Mbar, Ybar) so that residuals of the reduced variables
    equal residuals of the reconstructed full matrix."""
    m_last = handle.M[:, -1][:, np.newaxis]
    return handle.M[:, :-1] - m_last, handle.Y - m_last


def objective_reduced_f1(handle: ProblemHandle, Xr, sigma: float) -> float:
    """Negative correntropy in the reduced variables; equals objective_C at the
    reconstructed full matrix."""
    arr = _check_shapes(handle, Xr, reduced=True)
    sigma = _check_sigma(sigma)
    Mbar, Ybar = _reduced_system(handle)
    eps = Ybar - Mbar @ arr
    return -float(np.sum(_band_weights_of(eps, sigma)))


def gradient_reduced_f1(handle: ProblemHandle, Xr, sigma: float) -> np.ndarray:
    """Exact gradient of objective_reduced_f1, shape (R-1) x T."""
    arr = _check_shapes(handle, Xr, reduced=True)
    sigma = _check_sigma(sigma)
    Mbar, Ybar = _reduced_system(handle)
    eps = Ybar - Mbar @ arr
    w = _band_weights_of(eps, sigma)
    return -(1.0 / sigma**2) * (Mbar.T @ (w[:, np.newaxis] * eps))
