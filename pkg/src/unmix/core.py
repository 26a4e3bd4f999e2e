"""Domain types, validation, and the projection/proximal operators shared by all solvers.

All domain types freeze their arrays at construction (read-only views), so
instances are safe to share across threads; the operations here are pure
functions.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

# Feasibility slack used when tagging abundance matrices as constrained.
TOL_FEAS = 1e-9

# Condition-number estimate of M'M above which the endmember geometry is
# considered degenerate.
COND_LIMIT = 1e12


class UnmixError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInput(UnmixError):
    pass


class DimensionMismatch(UnmixError):
    pass


class NonFiniteData(UnmixError):
    pass


class SingularNormalEquations(UnmixError):
    pass


class InnerSolverFailure(UnmixError):
    pass


class NonFiniteIterate(UnmixError):
    pass


class TuningFailed(UnmixError):
    pass


class UndefinedMetric(UnmixError):
    pass


class ZeroNormSpectrum(UnmixError):
    pass


class GenerationFailed(UnmixError):
    pass


class RankDeficiencyWarning(UserWarning):
    """Endmember matrix is (close to) rank deficient."""


class MaxItersWarning(UserWarning):
    """Iterative solver hit its iteration cap before reaching tolerance."""


def _as_matrix(data, *, what: str) -> np.ndarray:
    """Copy `data` into a read-only float64 2-D array, rejecting NaN/Inf."""
    arr = np.array(data, dtype=float, copy=True)
    if arr.ndim != 2:
        raise InvalidInput(f"{what} must be a 2-D matrix, got ndim={arr.ndim}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise InvalidInput(f"{what} must have at least one row and one column, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteData(f"{what} contains non-finite entries")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ObservationMatrix:
    """Hyperspectral cube flattened to bands x pixels.

    Row l holds band l across all pixels; column t is the spectrum of pixel t.
    """

    data: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "data", _as_matrix(self.data, what="observation matrix"))

    @property
    def band_count(self) -> int:
        return self.data.shape[0]

    @property
    def pixel_count(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class EndmemberMatrix:
    """Known pure-material spectra, one endmember per column (bands x endmembers)."""

    data: np.ndarray

    def __post_init__(self):
        arr = _as_matrix(self.data, what="endmember matrix")
        if arr.shape[1] > arr.shape[0]:
            raise InvalidInput(
                f"endmember matrix must be tall (R <= L), got L={arr.shape[0]}, R={arr.shape[1]}"
            )
        object.__setattr__(self, "data", arr)

    @property
    def band_count(self) -> int:
        return self.data.shape[0]

    @property
    def endmember_count(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class AbundanceMatrix:
    """Per-pixel mixing coefficients (endmembers x pixels).

    `tag` asserts a constraint set the entries were produced under:
    "fully_constrained" (nonnegative, columns sum to one) or "nonnegative".
    Tag violations beyond TOL_FEAS are rejected at construction.
    """

    data: np.ndarray
    tag: Optional[str] = None

    def __post_init__(self):
        arr = _as_matrix(self.data, what="abundance matrix")
        if self.tag not in (None, "fully_constrained", "nonnegative"):
            raise InvalidInput(f"unknown abundance tag {self.tag!r}")
        if self.tag is not None and arr.min() < -TOL_FEAS:
            raise InvalidInput(
                f"tag {self.tag!r} requires entries >= -{TOL_FEAS}, got min {arr.min():.3e}"
            )
        if self.tag == "fully_constrained":
            colsums = arr.sum(axis=0)
            worst = np.max(np.abs(colsums - 1.0))
            if worst > TOL_FEAS:
                raise InvalidInput(
                    f"tag 'fully_constrained' requires column sums = 1 +/- {TOL_FEAS}, "
                    f"worst deviation {worst:.3e}"
                )
        object.__setattr__(self, "data", arr)

    @property
    def endmember_count(self) -> int:
        return self.data.shape[0]

    @property
    def pixel_count(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class SolverConfig:
    """Hyperparameters shared by the correntropy solvers.

    sigma           Gaussian kernel bandwidth; None is allowed only with sigma_auto.
    rho             ADMM penalty.
    eta             inner gradient step; None selects 0.1 * sigma^2 / ||M||_F^2.
    lam             l1 weight for the sparsity-promoting problem.
    eps_primal/dual per-coordinate residual tolerances; the outer loop stops on
                    residual norms below sqrt(R*T) times these.
    inner_tol       relative gradient-norm tolerance of the inner descent.
    sigma_auto      run the bandwidth tuner instead of using `sigma`.
    """

    sigma: Optional[float] = None
    rho: float = 1.0
    eta: Optional[float] = None
    lam: float = 0.0
    eps_primal: float = 1e-5
    eps_dual: float = 1e-5
    max_outer_iters: int = 1000
    max_inner_iters: int = 50
    inner_tol: float = 1e-6
    sigma_auto: bool = False

    def __post_init__(self):
        if self.sigma is not None and not (self.sigma > 0 and np.isfinite(self.sigma)):
            raise InvalidInput("sigma must be a positive finite real")
        if not (self.rho > 0 and np.isfinite(self.rho)):
            raise InvalidInput("rho must be a positive finite real")
        if self.eta is not None and not (self.eta > 0 and np.isfinite(self.eta)):
            raise InvalidInput("eta must be a positive finite real")
        if not (self.lam >= 0 and np.isfinite(self.lam)):
            raise InvalidInput("lam must be a nonnegative finite real")
        if not (self.eps_primal > 0 and self.eps_dual > 0):
            raise InvalidInput("residual tolerances must be positive")
        if self.max_outer_iters < 1 or self.max_inner_iters < 1:
            raise InvalidInput("iteration caps must be >= 1")
        if not (self.inner_tol > 0):
            raise InvalidInput("inner_tol must be positive")


class Termination(Enum):
    """Outcome of the three-fold outer stopping rule."""

    CONTINUE = "continue"
    RESIDUALS_SMALL = "residuals_small"
    PRIMAL_INCREASED = "primal_increased"
    MAX_ITERS = "max_iters"


@dataclass(frozen=True)
class SolverReport:
    """Per-iteration diagnostics of one ADMM run."""

    iterations_run: int
    primal_residuals: tuple
    dual_residuals: tuple
    objective_trace: tuple
    termination_reason: Termination
    sigma_used: Optional[float] = None

    def __post_init__(self):
        n = self.iterations_run
        for name in ("primal_residuals", "dual_residuals", "objective_trace"):
            seq = tuple(float(v) for v in getattr(self, name))
            object.__setattr__(self, name, seq)
            if len(seq) != n:
                raise InvalidInput(f"{name} must have length iterations_run={n}, got {len(seq)}")
        if self.termination_reason == Termination.CONTINUE:
            raise InvalidInput("a finished run cannot terminate with CONTINUE")
        if self.termination_reason == Termination.PRIMAL_INCREASED:
            if n < 2 or not self.primal_residuals[-1] > self.primal_residuals[-2]:
                raise InvalidInput(
                    "PRIMAL_INCREASED requires the last primal residual to exceed the previous one"
                )
        if self.sigma_used is not None and not (self.sigma_used > 0):
            raise InvalidInput("sigma_used must be positive when set")


@dataclass(frozen=True)
class ProblemHandle:
    """Validated, immutable bundle of one unmixing problem (Y, M, L, T, R)."""

    Y: np.ndarray
    M: np.ndarray
    L: int
    T: int
    R: int


def project_nonnegative(v) -> np.ndarray:
    """Project onto the first orthant: elementwise max(0, v). Idempotent."""
    arr = np.asarray(v, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise InvalidInput("project_nonnegative requires finite input")
    return np.maximum(arr, 0.0)


def soft_threshold(v, b: float) -> np.ndarray:
    """Shrink each entry toward zero by b: the proximal map of b * l1-norm.

    Entries with magnitude <= b (boundary included) map to zero.
    """
    if not (np.isscalar(b) and np.isfinite(b)):
        raise InvalidInput("threshold b must be a finite scalar")
    if b < 0:
        raise InvalidInput("threshold b must be nonnegative")
    arr = np.asarray(v, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise InvalidInput("soft_threshold requires finite input")
    return np.sign(arr) * np.maximum(np.abs(arr) - b, 0.0)


def validate_problem(Y, M) -> ProblemHandle:
    """Check that (Y, M) form a well-posed problem and bundle them in a handle.

    Accepts ObservationMatrix/EndmemberMatrix or raw 2-D arrays. Warns with
    RankDeficiencyWarning when the normal-equations condition estimate exceeds
    COND_LIMIT (e.g. duplicated endmember columns).
    """
    Ydata = Y.data if isinstance(Y, ObservationMatrix) else _as_matrix(Y, what="observation matrix")
    if isinstance(M, EndmemberMatrix):
        Mdata = M.data
    else:
        Mdata = EndmemberMatrix(M).data
    L, T = Ydata.shape
    LM, R = Mdata.shape
    if L != LM:
        raise DimensionMismatch(f"Y has {L} bands but M has {LM}")
    if R > L:
        raise DimensionMismatch(f"more endmembers ({R}) than bands ({L})")
    cond = np.linalg.cond(Mdata.T @ Mdata)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        warnings.warn(
            f"endmember matrix is near rank deficient (normal-equations condition ~{cond:.2e})",
            RankDeficiencyWarning,
            stacklevel=2,
        )
    return ProblemHandle(Y=Ydata, M=Mdata, L=L, T=T, R=R)


def linear_mix(M, X) -> np.ndarray:
    """Predicted observations M @ X of the linear mixing model."""
    Mdata = M.data if isinstance(M, EndmemberMatrix) else np.asarray(M, dtype=float)
    Xdata = X.data if isinstance(X, AbundanceMatrix) else np.asarray(X, dtype=float)
    if Mdata.shape[1] != Xdata.shape[0]:
        raise DimensionMismatch(
            f"M has {Mdata.shape[1]} endmembers but X has {Xdata.shape[0]} rows"
        )
    return Mdata @ Xdata
