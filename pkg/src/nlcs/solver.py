"""Constrained least-squares solver (projected gradient descent).

Minimizes the averaged residual objective

    (1/m) * sum_i (y_i - <a_i, z>)^2      over  z in K,

for any constraint set with an exact projection.  The fixed step
0.9 * m / (2*||A||_op^2) is the inverse gradient-Lipschitz constant times a
safety factor, which makes the objective trace monotone; a backtracking line
search is available as a fallback for ill-estimated spectral norms.

``GeneralizedLasso`` wraps the same routine behind the scikit-learn estimator
API so the solver composes with pipelines and model-selection tooling.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .errors import InvalidParameterError
from .geometry import project
from .model import ConstraintSet, FullSpace, MeasurementMatrix
from .seeds import rng_from

__all__ = [
    "SolveOptions",
    "SolveDiagnostics",
    "spectral_norm_sq",
    "solve_lasso",
    "GeneralizedLasso",
]


@dataclass(frozen=True)
class SolveOptions:
    max_iters: int = 5000
    rel_tol: float = 1e-9               # on relative iterate change
    step_rule: str = "fixed"            # "fixed" (inverse Lipschitz) or "backtracking"
    safety_factor: float = 0.9
    record_trace: bool = False

    def __post_init__(self):
        if self.max_iters < 1:
            raise InvalidParameterError("max_iters must be >= 1")
        if self.rel_tol <= 0:
            raise InvalidParameterError("rel_tol must be > 0")
        if self.step_rule not in ("fixed", "backtracking"):
            raise InvalidParameterError("step_rule must be 'fixed' or 'backtracking'")
        if not (0.0 < self.safety_factor <= 1.0):
            raise InvalidParameterError("safety_factor must lie in (0, 1]")


@dataclass
class SolveDiagnostics:
    iterations: int
    objective: float                     # (1/m)*||y - A z||_2^2 at the returned point
    converged: bool
    stationarity: float                  # ||z - P_K(z - eta*grad)||_2 at the end
    trace: Optional[List[float]] = field(default=None, repr=False)


def _as_matrix(a) -> np.ndarray:
    if isinstance(a, MeasurementMatrix):
        return a.entries
    return np.asarray(a, dtype=float)


def spectral_norm_sq(a, iters: int = 100, seed: int = 0) -> float:
    """Power-iteration estimate of ||A||_op^2; exact 0 for the zero matrix."""
    if iters < 1:
        raise InvalidParameterError("iters must be >= 1")
    mat = _as_matrix(a)
    if not np.any(mat):
        return 0.0
    v = rng_from(seed, "power").standard_normal(mat.shape[1])
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(iters):
        w = mat.T @ (mat @ v)
        nrm = np.linalg.norm(w)
        if nrm == 0.0:
            return 0.0
        est = nrm
        v = w / nrm
    return float(est)


def _objective(a: np.ndarray, y: np.ndarray, z: np.ndarray) -> float:
    r = a @ z - y
    return float(r @ r) / a.shape[0]


def solve_lasso(
    a,
    y: np.ndarray,
    cset: Optional[ConstraintSet] = None,
    opts: Optional[SolveOptions] = None,
    z0: Optional[np.ndarray] = None,
) -> Tuple[np.ndarray, SolveDiagnostics]:
    """Projected gradient descent on the constrained least-squares objective.

    Starts at P_K(0) (or ``z0``) and iterates z <- P_K(z - eta*grad).  On
    non-convergence within ``max_iters`` the best iterate is returned with
    ``converged=False`` rather than raising.
    """
    mat = _as_matrix(a)
    y = np.asarray(y, dtype=float)
    m, p = mat.shape
    if y.shape != (m,):
        raise InvalidParameterError(f"y has shape {y.shape}, expected ({m},)")
    cset = FullSpace() if cset is None else cset
    opts = SolveOptions() if opts is None else opts

    sq = spectral_norm_sq(mat)
    if sq == 0.0:
        z = project(cset, np.zeros(p)).point
        return z, SolveDiagnostics(0, _objective(mat, y, z), True, 0.0,
                                   [_objective(mat, y, z)] if opts.record_trace else None)
    eta = opts.safety_factor * m / (2.0 * sq)

    z = project(cset, np.zeros(p) if z0 is None else np.asarray(z0, dtype=float)).point
    trace = [_objective(mat, y, z)] if opts.record_trace else None
    converged = False
    it = 0
    for it in range(1, opts.max_iters + 1):
        grad = (2.0 / m) * (mat.T @ (mat @ z - y))
        if opts.step_rule == "fixed":
            z_new = project(cset, z - eta * grad).point
        else:
            step = eta
            f_z = _objective(mat, y, z)
            while True:
                z_new = project(cset, z - step * grad).point
                if _objective(mat, y, z_new) <= f_z + 1e-4 * float(grad @ (z_new - z)):
                    break
                step *= 0.5
                if step < 1e-20:
                    z_new = z.copy()
                    break
        if trace is not None:
            trace.append(_objective(mat, y, z_new))
        delta = np.linalg.norm(z_new - z)
        z = z_new
        if delta <= opts.rel_tol * max(1.0, np.linalg.norm(z)):
            converged = True
            break

    grad = (2.0 / m) * (mat.T @ (mat @ z - y))
    stationarity = float(np.linalg.norm(z - project(cset, z - eta * grad).point))
    return z, SolveDiagnostics(it, _objective(mat, y, z), converged, stationarity, trace)


class GeneralizedLasso(BaseEstimator, RegressorMixin):
    """Least-squares regression constrained to a convex set.

    Parameters
    ----------
    constraint : ConstraintSet or None
        Feasible set K; ``None`` means unconstrained.
    max_iters, rel_tol, step_rule, safety_factor, record_trace :
        Projected-gradient options, see :class:`SolveOptions`.

    Attributes
    ----------
    coef_ : ndarray of shape (p,)
        The constrained minimizer.
    n_iter_ : int
    converged_ : bool
    objective_ : float
        Final value of (1/m)*||y - X w||^2.
    diagnostics_ : SolveDiagnostics
    """

    def __init__(
        self,
        constraint: Optional[ConstraintSet] = None,
        max_iters: int = 5000,
        rel_tol: float = 1e-9,
        step_rule: str = "fixed",
        safety_factor: float = 0.9,
        record_trace: bool = False,
    ):
        self.constraint = constraint
        self.max_iters = max_iters
        self.rel_tol = rel_tol
        self.step_rule = step_rule
        self.safety_factor = safety_factor
        self.record_trace = record_trace

    def fit(self, X, y):
        X, y = check_X_y(X, y, y_numeric=True)
        opts = SolveOptions(
            max_iters=self.max_iters,
            rel_tol=self.rel_tol,
            step_rule=self.step_rule,
            safety_factor=self.safety_factor,
            record_trace=self.record_trace,
        )
        coef, diag = solve_lasso(X, y, self.constraint, opts)
        self.coef_ = coef
        self.n_iter_ = diag.iterations
        self.converged_ = diag.converged
        self.objective_ = diag.objective
        self.diagnostics_ = diag
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X)
        return X @ self.coef_
