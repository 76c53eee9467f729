"""Diagnostic quantities: target scalars, mismatch, mean widths, outlier
norms, error metrics, support recovery, stability probes, and rate fits.

Monte-Carlo estimates report a conservative standard error (1.96 * sample
std / sqrt(n)); vector-valued means report the Euclidean norm of the
coordinate-wise standard errors.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, Iterable, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import integrate

from .errors import (
    DegenerateInputError,
    FitImpossibleError,
    InfeasibleCenterError,
    InvalidParameterError,
)
from .geometry import project, support_max
from .model import ConstraintSet, MeasurementEnsemble, ObservationModel, gen_matrix
from .observe import modulo_val, observe, sign_val
from .seeds import derive_seed, rng_from

__all__ = [
    "NonLinearity",
    "nonlinearity",
    "ScalarTarget",
    "mu_scalar",
    "MismatchEstimate",
    "target_mismatch",
    "WidthEstimate",
    "mean_width_global",
    "mean_width_local",
    "conic_width_proxy",
    "decoupling_probe",
    "top_norm",
    "tail_norm",
    "direction_error",
    "support_recover",
    "local_stability_probe",
    "fit_rate",
]


# ---------------------------------------------------------------------------
# scalar targets  mu = E[f(g) g],  g ~ N(0,1)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NonLinearity:
    """A scalar non-linearity with its discontinuity locations."""

    fn: Callable[[np.ndarray], np.ndarray]
    breakpoints: Tuple[float, ...] = ()
    name: str = "custom"


def nonlinearity(name: str, lam: Optional[float] = None) -> NonLinearity:
    """Built-in non-linearities: identity, sign, tanh, modulo(lam)."""
    if name == "identity":
        return NonLinearity(lambda v: np.asarray(v, dtype=float), (), "identity")
    if name == "sign":
        return NonLinearity(sign_val, (0.0,), "sign")
    if name == "tanh":
        return NonLinearity(np.tanh, (), "tanh")
    if name == "modulo":
        if lam is None or lam <= 0:
            raise InvalidParameterError("modulo needs lam > 0")
        # jumps at odd multiples of lam
        k_max = int(np.ceil(_QUAD_CUTOFF / lam))
        bps = tuple(k * lam for k in range(-k_max, k_max + 1) if k % 2 != 0)
        return NonLinearity(lambda v: modulo_val(v, lam), bps, f"modulo({lam})")
    raise InvalidParameterError(f"no built-in non-linearity named {name!r}")


@dataclass(frozen=True)
class ScalarTarget:
    mu: float
    method: str                       # "quadrature" or "monte_carlo"
    stderr: Optional[float] = None    # monte_carlo only
    n_samples: Optional[int] = None


_QUAD_CUTOFF = 12.0   # |x| > 12 contributes < 1e-30 to E[f(g) g] for bounded-growth f


def _std_normal_pdf(x):
    return np.exp(-0.5 * x * x) / np.sqrt(2.0 * np.pi)


def mu_scalar(
    f: Union[str, NonLinearity, Callable],
    method: str = "quadrature",
    n: int = 1_000_000,
    seed: int = 0,
    lam: Optional[float] = None,
) -> ScalarTarget:
    """Numerical expectation mu = E[f(g) g] against the standard normal.

    Quadrature splits the integration domain at the non-linearity's jump
    locations, so discontinuous built-ins (sign, modulo) are integrated to
    near machine precision.  Monte Carlo reports a 1.96-scaled stderr.
    """
    if isinstance(f, str):
        nl = nonlinearity(f, lam=lam)
    elif isinstance(f, NonLinearity):
        nl = f
    elif callable(f):
        nl = NonLinearity(f, ())
    else:
        raise InvalidParameterError("f must be a name, NonLinearity, or callable")

    if method == "quadrature":
        pts = sorted(b for b in nl.breakpoints if -_QUAD_CUTOFF < b < _QUAD_CUTOFF)
        val, _ = integrate.quad(
            lambda u: float(nl.fn(np.asarray(u))) * u * _std_normal_pdf(u),
            -_QUAD_CUTOFF,
            _QUAD_CUTOFF,
            points=pts or None,
            limit=max(200, 4 * len(pts) + 50),
            epsabs=1e-13,
            epsrel=1e-12,
        )
        return ScalarTarget(mu=float(val), method="quadrature")
    if method == "monte_carlo":
        g = rng_from(seed, "mu_mc").standard_normal(n)
        vals = np.asarray(nl.fn(g), dtype=float) * g
        return ScalarTarget(
            mu=float(vals.mean()),
            method="monte_carlo",
            stderr=float(1.96 * vals.std(ddof=1) / np.sqrt(n)),
            n_samples=n,
        )
    raise InvalidParameterError("method must be 'quadrature' or 'monte_carlo'")


# ---------------------------------------------------------------------------
# target mismatch  rho(x) = || E[y(x) a] - Tx ||_2
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MismatchEstimate:
    rho_hat: float
    stderr: float          # norm of the coordinate-wise 1.96*std/sqrt(n) vector
    n_samples: int


def target_mismatch(
    model: ObservationModel,
    x,
    tx: np.ndarray,
    n: int = 100_000,
    seed: int = 0,
    ens: Optional[MeasurementEnsemble] = None,
    chunk: int = 20_000,
) -> MismatchEstimate:
    """Monte-Carlo estimate of the bias floor ||E[y(x) a] - Tx||_2.

    Fresh measurement rows and dither are drawn in chunks; the estimator is
    the norm of the sample-mean vector minus ``tx``.
    """
    if n < 1000:
        raise InvalidParameterError("need n >= 1000")
    tx = np.asarray(tx, dtype=float)
    p = tx.size
    if ens is None:
        ens = MeasurementEnsemble(law="gaussian", p=p)
    total = np.zeros(p)
    total_sq = np.zeros(p)
    done = 0
    k = 0
    while done < n:
        size = min(chunk, n - done)
        a = gen_matrix(ens, size, seed=derive_seed(seed, "mismatch", k))
        y = observe(model, a, x, seed=derive_seed(seed, "mismatch-dither", k))
        prods = y[:, None] * a.entries
        total += prods.sum(axis=0)
        total_sq += (prods**2).sum(axis=0)
        done += size
        k += 1
    mean = total / n
    var = np.maximum(total_sq / n - mean**2, 0.0) * n / max(n - 1, 1)
    se = 1.96 * np.sqrt(var / n)
    return MismatchEstimate(
        rho_hat=float(np.linalg.norm(mean - tx)),
        stderr=float(np.linalg.norm(se)),
        n_samples=n,
    )


# ---------------------------------------------------------------------------
# Gaussian mean widths
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WidthEstimate:
    value: float
    stderr: float
    n_samples: int
    kind: str


def _width_samples_set(cset: ConstraintSet, p: int, n: int, seed: int) -> np.ndarray:
    rng = rng_from(seed, "width")
    vals = np.empty(n)
    for i in range(n):
        g = rng.standard_normal(p)
        vals[i], _ = support_max(cset, np.inf, g)
    return vals


def mean_width_global(obj, n: int = 10_000, seed: int = 0, p: Optional[int] = None) -> WidthEstimate:
    """E[sup_{v in H} <g, v>] for a constraint set or a finite candidate array.

    ``obj`` is either a ConstraintSet (needs ``p``) or an array of shape (k, p)
    whose rows are the candidate points (the supremum is over the rows).
    """
    if isinstance(obj, np.ndarray):
        cand = np.unique(np.atleast_2d(np.asarray(obj, dtype=float)), axis=0)
        if cand.shape[0] == 1:
            # sup over a singleton is a centered linear functional
            return WidthEstimate(0.0, 0.0, n, "global")
        g = rng_from(seed, "width").standard_normal((n, cand.shape[1]))
        vals = (g @ cand.T).max(axis=1)
    else:
        if p is None:
            raise InvalidParameterError("p is required for constraint-set widths")
        vals = _width_samples_set(obj, p, n, seed)
    return WidthEstimate(
        value=float(vals.mean()),
        stderr=float(1.96 * vals.std(ddof=1) / np.sqrt(n)),
        n_samples=n,
        kind="global",
    )


def mean_width_local(
    cset,
    center: np.ndarray,
    t: float,
    n: int = 2_000,
    seed: int = 0,
) -> WidthEstimate:
    """Local mean width of ``cset`` around ``center`` at scale ``t``.

    Estimates (1/t) * E[max <g, v> over v in (cset - center), ||v||_2 <= t],
    the ball relaxation of the spherical intersection; an upper-bound proxy
    for the sphere-intersected quantity.  ``cset`` may be a finite candidate
    array of shape (k, p), in which case the maximum runs over the rows.
    """
    if t <= 0:
        raise InvalidParameterError("t must be > 0")
    center = np.asarray(center, dtype=float)
    if isinstance(cset, np.ndarray):
        cand = np.atleast_2d(np.asarray(cset, dtype=float)) - center
        if not np.any(np.linalg.norm(cand, axis=1) <= 1e-8):
            raise InfeasibleCenterError("center is not one of the candidate points")
        cand = cand[np.linalg.norm(cand, axis=1) <= t + 1e-12]
        g = rng_from(seed, "width-local").standard_normal((n, center.size))
        vals = (g @ cand.T).max(axis=1) / t
    else:
        res = project(cset, center)
        if np.linalg.norm(res.point - center) > 1e-8 * max(1.0, np.linalg.norm(center)):
            raise InfeasibleCenterError("center does not lie in the constraint set")
        rng = rng_from(seed, "width-local")
        vals = np.empty(n)
        for i in range(n):
            g = rng.standard_normal(center.size)
            val, _ = support_max(cset, t, g, center=center)
            vals[i] = val / t
    return WidthEstimate(
        value=float(vals.mean()),
        stderr=float(1.96 * vals.std(ddof=1) / np.sqrt(n)),
        n_samples=n,
        kind=f"local(t={t:g})",
    )


def conic_width_proxy(
    cset,
    center: np.ndarray,
    diam: float,
    n: int = 2_000,
    seed: int = 0,
) -> WidthEstimate:
    """Approximate conic width: the local width at the tiny scale 1e-3 * diam.

    Approximate by construction; diagnostics only, never a pass/fail quantity.
    """
    if diam <= 0:
        raise InvalidParameterError("diam must be > 0")
    est = mean_width_local(cset, center, t=1e-3 * diam, n=n, seed=seed)
    return WidthEstimate(est.value, est.stderr, est.n_samples, "conic-approx")


def decoupling_probe(
    cset: ConstraintSet,
    centers: np.ndarray,
    t: float,
    n: int = 1_000,
    seed: int = 0,
) -> Tuple[float, float, float]:
    """Compare the width of a union of localizations against its split bound.

    lhs: (1/t) * E[max over sampled centers of the capped support function]
    rhs: max over centers of the per-center local width, plus w(centers)/t
    Returns (lhs, rhs, lhs/rhs).  The bound direction holds up to a universal
    constant, so only the ratio's order of magnitude is meaningful.
    """
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    if t <= 0:
        raise InvalidParameterError("t must be > 0")
    rng = rng_from(seed, "probe")
    lhs_vals = np.empty(n)
    for i in range(n):
        g = rng.standard_normal(centers.shape[1])
        lhs_vals[i] = max(
            support_max(cset, t, g, center=c)[0] for c in centers
        ) / t
    lhs = float(lhs_vals.mean())
    per_center = max(
        mean_width_local(cset, c, t, n=n, seed=derive_seed(seed, "probe", j)).value
        for j, c in enumerate(centers)
    )
    w_centers = mean_width_global(centers, n=n, seed=derive_seed(seed, "probe-glob")).value
    rhs = per_center + w_centers / t
    return lhs, rhs, lhs / rhs if rhs > 0 else np.inf


# ---------------------------------------------------------------------------
# outlier norms, error metrics, support recovery
# ---------------------------------------------------------------------------

def _sorted_sq(w: np.ndarray, m0: int) -> Tuple[np.ndarray, np.ndarray]:
    w = np.asarray(w, dtype=float)
    if m0 < 0 or m0 > w.size:
        raise InvalidParameterError("need 0 <= m0 <= len(w)")
    sq = np.sort(np.abs(w))[::-1] ** 2
    return sq[:m0], sq[m0:]


def top_norm(w: np.ndarray, m0: int) -> float:
    """l2 norm of the m0 largest-magnitude entries."""
    head, _ = _sorted_sq(w, m0)
    return float(np.sqrt(head.sum()))


def tail_norm(w: np.ndarray, m0: int) -> float:
    """l2 norm of everything but the m0 largest-magnitude entries."""
    _, tail = _sorted_sq(w, m0)
    return float(np.sqrt(tail.sum()))


def direction_error(z: np.ndarray, x: np.ndarray, mu: float) -> float:
    """||z - mu * x / ||x||_2||_2; the scale-adjusted directional error."""
    x = np.asarray(x, dtype=float)
    nrm = np.linalg.norm(x)
    if nrm == 0.0:
        raise DegenerateInputError("direction error undefined for the zero signal")
    return float(np.linalg.norm(np.asarray(z, dtype=float) - mu * x / nrm))


def support_recover(z: np.ndarray, s: int) -> np.ndarray:
    """Indices of the s largest |z_j|; ties go to the lowest index."""
    z = np.asarray(z, dtype=float)
    if not (1 <= s <= z.size):
        raise InvalidParameterError("need 1 <= s <= len(z)")
    order = np.argsort(-np.abs(z), kind="stable")
    return np.sort(order[:s])


def local_stability_probe(
    model: ObservationModel,
    pairs: Sequence[Tuple[np.ndarray, np.ndarray]],
    a,
    m0: int,
    seed: int = 0,
) -> Tuple[float, float]:
    """Empirical noise functionals of close signal pairs on a fixed ensemble.

    For each pair (x, x') the two observation vectors share the ensemble and
    the dither realization.  Returns the maxima over pairs of
    (1/sqrt(m)) * top_norm(diff, 2*m0)  and  (1/sqrt(m)) * tail_norm(diff, m0).
    """
    top_max = 0.0
    tail_max = 0.0
    for j, (x, x_prime) in enumerate(pairs):
        s = derive_seed(seed, "stability", j)
        y1 = observe(model, a, x, seed=s)
        y2 = observe(model, a, x_prime, seed=s)
        diff = y1 - y2
        m = diff.size
        top_max = max(top_max, top_norm(diff, min(2 * m0, m)) / np.sqrt(m))
        tail_max = max(tail_max, tail_norm(diff, m0) / np.sqrt(m))
    return top_max, tail_max


# ---------------------------------------------------------------------------
# rate fitting
# ---------------------------------------------------------------------------

def fit_rate(points: Iterable[Tuple[float, float]], window: Optional[int] = None) -> float:
    """Least-squares slope of log(error) against log(m).

    Non-positive errors are excluded with a warning; ``window`` keeps only
    the last that-many points (sorted by m).
    """
    pts = sorted((float(m), float(e)) for m, e in points)
    usable = [(m, e) for m, e in pts if e > 0]
    dropped = len(pts) - len(usable)
    if dropped:
        warnings.warn(f"fit_rate: excluded {dropped} non-positive error value(s)")
    if window is not None:
        usable = usable[-window:]
    ms = sorted({m for m, _ in usable})
    if len(ms) < 2:
        raise FitImpossibleError("need at least 2 distinct m with positive errors")
    lx = np.log([m for m, _ in usable])
    ly = np.log([e for _, e in usable])
    slope, _ = np.polyfit(lx, ly, 1)
    return float(slope)
