"""Exact Euclidean projections and capped support-function maximizers.

Projections are exact (up to bisection tolerance for the TV ball):

* l1 ball: sort-based threshold, O(p log p)
* l2 ball: radial scaling
* TV ball: bisection on the penalty multiplier of ||D.||_1 with a direct
  taut-string solve of the 1-D total-variation prox in the inner loop
* box: clipping

``support_max`` maximizes <g, v> over a constraint set intersected with an
l2 ball of radius ``l2_cap``; it backs the local mean-width estimators.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .errors import DimensionMismatchError, UnboundedProblemError
from .model import Box, ConstraintSet, FullSpace, L1Ball, L2Ball, TVBall, tv_seminorm

try:
    from numba import njit
except ImportError:  # pragma: no cover - numba is a declared dependency
    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f

__all__ = ["ProjectionResult", "project", "support_max", "tv_prox"]

_TV_RESIDUAL_TOL = 1e-12
_TV_BISECT_ITERS = 200


@dataclass(frozen=True)
class ProjectionResult:
    point: np.ndarray
    active: bool          # whether the constraint was binding
    iterations: int       # inner-solver count (bisection steps; 0 if closed form)


# ---------------------------------------------------------------------------
# 1-D total variation prox (taut string, Condat's direct algorithm)
# ---------------------------------------------------------------------------

@njit(cache=True)
def _tv_prox_core(y0, lam):
    n = y0.shape[0]
    out = np.empty(n)
    if n == 0:
        return out
    if lam <= 0.0 or n == 1:
        out[:] = y0
        return out
    y = np.empty(n + 1)
    y[1:] = y0
    x = np.empty(n + 1)
    big_n = n
    k = 1
    k0 = 1
    km = 1
    kp = 1
    vmin = y[1] - lam
    vmax = y[1] + lam
    umin = lam
    umax = -lam
    while True:
        if k == big_n:
            x[big_n] = vmin + umin
            break
        while k < big_n:
            if y[k + 1] + umin < vmin - lam:          # negative jump
                for i in range(k0, km + 1):
                    x[i] = vmin
                km += 1
                k = km
                k0 = km
                kp = km
                vmin = y[k]
                vmax = y[k] + 2.0 * lam
                umin = lam
                umax = -lam
            elif y[k + 1] + umax > vmax + lam:        # positive jump
                for i in range(k0, kp + 1):
                    x[i] = vmax
                kp += 1
                k = kp
                k0 = kp
                km = kp
                vmin = y[k] - 2.0 * lam
                vmax = y[k]
                umin = lam
                umax = -lam
            else:                                      # no jump
                k += 1
                umin += y[k] - vmin
                umax += y[k] - vmax
                if umin >= lam:
                    vmin += (umin - lam) / (k - k0 + 1)
                    umin = lam
                    km = k
                if umax <= -lam:
                    vmax += (umax + lam) / (k - k0 + 1)
                    umax = -lam
                    kp = k
        if umin < 0.0:                                 # boundary negative jump
            for i in range(k0, km + 1):
                x[i] = vmin
            km += 1
            k = km
            k0 = km
            vmin = y[k]
            umin = lam
            umax = y[k] + lam - vmax
        elif umax > 0.0:                               # boundary positive jump
            for i in range(k0, kp + 1):
                x[i] = vmax
            kp += 1
            k = kp
            k0 = kp
            vmax = y[k]
            umax = -lam
            umin = y[k] - lam - vmin
        else:
            v = vmin + umin / (k - k0 + 1)
            for i in range(k0, big_n + 1):
                x[i] = v
            break
    out[:] = x[1:]
    return out


def tv_prox(y: np.ndarray, lam: float) -> np.ndarray:
    """argmin_x 0.5*||x - y||_2^2 + lam*||Dx||_1 (exact, O(p) typical)."""
    return _tv_prox_core(np.ascontiguousarray(y, dtype=np.float64), float(lam))


# ---------------------------------------------------------------------------
# projections
# ---------------------------------------------------------------------------

def _project_l1(x: np.ndarray, radius: float) -> Tuple[np.ndarray, bool]:
    a = np.abs(x)
    if a.sum() <= radius:
        return x.copy(), False
    u = np.sort(a)[::-1]
    cumsum = np.cumsum(u)
    ks = np.arange(1, x.size + 1)
    rho = np.nonzero(u * ks > cumsum - radius)[0][-1]
    theta = (cumsum[rho] - radius) / (rho + 1.0)
    return np.sign(x) * np.maximum(a - theta, 0.0), True


def _project_tv(x: np.ndarray, radius: float) -> Tuple[np.ndarray, bool, int]:
    if tv_seminorm(x) <= radius:
        return x.copy(), False, 0
    lo = 0.0
    hi = max(1e-8, float(np.abs(np.diff(x)).max()))
    while tv_seminorm(tv_prox(x, hi)) > radius:
        hi *= 2.0
    it = 0
    for it in range(1, _TV_BISECT_ITERS + 1):
        mid = 0.5 * (lo + hi)
        val = tv_seminorm(tv_prox(x, mid))
        if val > radius:
            lo = mid
        else:
            hi = mid
            if radius - val <= _TV_RESIDUAL_TOL * max(1.0, radius):
                break
        if hi - lo <= 1e-15 * hi:            # multiplier bracket collapsed
            break
    # the hi side is always feasible, so the constraint residual is <= 0
    return tv_prox(x, hi), True, it


def project(cset: ConstraintSet, x: np.ndarray) -> ProjectionResult:
    """Euclidean projection onto the closed convex set ``cset``."""
    x = np.asarray(x, dtype=float)
    if isinstance(cset, FullSpace):
        return ProjectionResult(x.copy(), active=False, iterations=0)
    if isinstance(cset, L2Ball):
        nrm = np.linalg.norm(x)
        if nrm <= cset.radius:
            return ProjectionResult(x.copy(), active=False, iterations=0)
        return ProjectionResult(x * (cset.radius / nrm), active=True, iterations=0)
    if isinstance(cset, L1Ball):
        point, active = _project_l1(x, cset.radius)
        return ProjectionResult(point, active=active, iterations=0)
    if isinstance(cset, Box):
        clipped = np.clip(x, cset.lo, cset.hi)
        return ProjectionResult(clipped, active=bool(np.any(clipped != x)), iterations=0)
    if isinstance(cset, TVBall):
        point, active, it = _project_tv(x, cset.radius)
        return ProjectionResult(point, active=active, iterations=it)
    raise TypeError(f"unknown constraint set {cset!r}")


# ---------------------------------------------------------------------------
# support-function maximization over  (cset - center)  intersected with t*B_2
# ---------------------------------------------------------------------------

def _support_uncapped(cset: ConstraintSet, g: np.ndarray) -> Tuple[float, np.ndarray]:
    if isinstance(cset, L1Ball):
        # vertex of the cross-polytope; ties to the lowest index
        i = int(np.argmax(np.abs(g)))
        v = np.zeros_like(g)
        v[i] = cset.radius * (1.0 if g[i] >= 0 else -1.0)
        return cset.radius * float(np.abs(g[i])), v
    if isinstance(cset, L2Ball):
        nrm = np.linalg.norm(g)
        if nrm == 0.0:
            return 0.0, np.zeros_like(g)
        return cset.radius * float(nrm), cset.radius * g / nrm
    if isinstance(cset, Box):
        v = np.where(g >= 0, cset.hi, cset.lo)
        return float(g @ v), v
    raise UnboundedProblemError(
        f"support function of {type(cset).__name__} is unbounded without an l2 cap"
    )


def _support_l1_capped(radius: float, t: float, g: np.ndarray) -> Tuple[float, np.ndarray]:
    """max <g, v> s.t. ||v||_1 <= radius, ||v||_2 <= t.

    Solution is a rescaled soft-thresholding of g; the threshold is found by
    bisection so that the l1 constraint is met with the l2 norm pinned at t.
    """
    a = np.abs(g)
    if a.max() == 0.0:
        return 0.0, np.zeros_like(g)
    if radius <= t:
        # the l2 cap is implied by ||v||_2 <= ||v||_1 <= radius <= t
        return _support_uncapped(L1Ball(radius), g)

    def scaled(theta):
        s = np.maximum(a - theta, 0.0)
        nrm2 = np.linalg.norm(s)
        if nrm2 == 0.0:
            return None, 0.0
        v = (t / nrm2) * np.sign(g) * s
        return v, float(np.abs(v).sum())

    v0, l1 = scaled(0.0)
    if l1 <= radius:
        return float(g @ v0), v0
    lo, hi = 0.0, float(a.max())
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        v, l1 = scaled(mid)
        if v is None or l1 < radius:
            hi = mid
        else:
            lo = mid
        if hi - lo <= 1e-15 * max(1.0, a.max()):
            break
    v, _ = scaled(lo)
    # exact renormalization onto the l1 sphere keeps both constraints tight
    v *= min(1.0, radius / np.abs(v).sum())
    return float(g @ v), v


def _support_capped_generic(
    cset: ConstraintSet, t: float, g: np.ndarray, center: Optional[np.ndarray]
) -> Tuple[float, np.ndarray]:
    """max <g, v> over (cset - center) inter t*B_2 via multiplier bisection.

    For mu > 0 the penalized maximizer is v(mu) = P_{cset-center}(g/mu), whose
    norm decreases in mu; bisection pins ||v(mu)||_2 = t.  If the cap is slack
    even at the smallest multiplier the supremum over the set is returned.
    """
    c = np.zeros_like(g) if center is None else center

    # bounded sets: if the uncapped maximizer already satisfies the cap, the
    # bisection (whose tiny-mu limit is numerically delicate) is unnecessary
    if not isinstance(cset, (TVBall, FullSpace)):
        _, v_unc = _support_uncapped(cset, g)
        v_shift = v_unc - c
        if np.linalg.norm(v_shift) <= t:
            return float(g @ v_shift), v_shift

    def v_of(mu):
        return project(cset, g / mu + c).point - c

    # keep projection inputs <= ~1e9 * problem scale; larger inputs lose the
    # radius to cancellation inside the projection arithmetic
    scale = float(np.abs(g).max())
    if scale == 0.0:
        return 0.0, np.zeros_like(g)
    mu_lo = 1e-9 * scale / (t + float(np.abs(c).max()) + 1.0)
    mu_hi = max(1.0, 2.0 * mu_lo)
    v = v_of(mu_hi)
    while np.linalg.norm(v) > t:
        mu_hi *= 4.0
        v = v_of(mu_hi)
        if mu_hi > 1e18 * scale:
            break
    v = v_of(mu_lo)
    if np.linalg.norm(v) <= t:
        return float(g @ v), v
    for _ in range(120):
        mu = math.sqrt(mu_lo * mu_hi)
        if np.linalg.norm(v_of(mu)) > t:
            mu_lo = mu
        else:
            mu_hi = mu
    v = v_of(mu_hi)                      # feasible side of the cap
    return float(g @ v), v


def support_max(
    cset: ConstraintSet,
    l2_cap: float,
    g: np.ndarray,
    center: Optional[np.ndarray] = None,
) -> Tuple[float, np.ndarray]:
    """Maximize <g, v> over {v in cset - center, ||v||_2 <= l2_cap}.

    ``l2_cap=np.inf`` removes the cap (unbounded sets then raise).  The value
    is >= 0 whenever 0 lies in the feasible set.  Ties among equal-|g| entries
    of the l1-ball vertex maximizer go to the lowest index.
    """
    g = np.asarray(g, dtype=float)
    if l2_cap <= 0:
        raise UnboundedProblemError("l2_cap must be positive")
    if center is not None:
        center = np.asarray(center, dtype=float)
        if center.shape != g.shape:
            raise DimensionMismatchError("center and g must have the same shape")

    if np.isinf(l2_cap):
        if isinstance(cset, FullSpace) or isinstance(cset, TVBall):
            raise UnboundedProblemError(
                f"{type(cset).__name__} with l2_cap=inf is unbounded"
            )
        val, v = _support_uncapped(cset, g)
        if center is not None:
            val -= float(g @ center)
            v = v - center
        return val, v

    if isinstance(cset, FullSpace):
        nrm = np.linalg.norm(g)
        if nrm == 0.0:
            return 0.0, np.zeros_like(g)
        return l2_cap * float(nrm), l2_cap * g / nrm
    if isinstance(cset, L2Ball) and center is None:
        r = min(cset.radius, l2_cap)
        nrm = np.linalg.norm(g)
        if nrm == 0.0:
            return 0.0, np.zeros_like(g)
        return r * float(nrm), r * g / nrm
    if isinstance(cset, L1Ball) and center is None:
        return _support_l1_capped(cset.radius, l2_cap, g)
    return _support_capped_generic(cset, l2_cap, g, center)
