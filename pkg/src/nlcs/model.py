"""Domain types and random generation of signals and measurement ensembles.

The module defines the structured-signal generator (:func:`gen_signal`), the
sub-Gaussian measurement ensembles (:func:`gen_matrix`), the observation-model
and constraint-set descriptors consumed by ``observe``/``geometry``/``solver``,
and the target maps that send a signal to the vector the constrained Lasso
actually estimates.

All generators are pure functions of their spec and an explicit integer seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from .errors import (
    ConstraintInfeasibleError,
    DegenerateInputError,
    InvalidDimensionError,
    InvalidParameterError,
)
from .seeds import rng_from

__all__ = [
    "SignalSpec",
    "MeasurementEnsemble",
    "MeasurementMatrix",
    "Linear",
    "LinearGaussNoise",
    "OneBit",
    "OneBitDither",
    "MultiBitDither",
    "Modulo",
    "Sim",
    "CoordWise",
    "VarSelect",
    "ObservationModel",
    "L1Ball",
    "L2Ball",
    "TVBall",
    "Box",
    "FullSpace",
    "ConstraintSet",
    "CorruptionSpec",
    "ScaleBy",
    "NormalizeScale",
    "IdentityMap",
    "MonteCarloTarget",
    "TargetMap",
    "gen_signal",
    "gen_matrix",
    "target_of",
    "diff_operator",
    "tv_seminorm",
]

_MAX_REJECTION_TRIES = 500


# ---------------------------------------------------------------------------
# signal specs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SignalSpec:
    """Parameters of the structured ground-truth generator.

    family : one of "sparse", "gradient_sparse", "unit_sphere", "support"
    p      : ambient dimension
    s      : sparsity (number of nonzeros, jumps, or active indices)
    delta_sep : separation parameter in (0, 1] for gradient-sparse signals;
        jump positions keep a gap of at least floor(delta_sep*p/(s+1)).
    r_tune : tuning norm; ``||x||_1 = r_tune`` for sparse signals and
        ``||Dx||_1 = r_tune`` for gradient-sparse signals (exact).
    r_l2   : Euclidean radius; a bound for sparse/gradient-sparse families,
        the exact norm for "unit_sphere".
    """

    family: str
    p: int
    s: int
    delta_sep: float = 1.0
    r_tune: Optional[float] = None
    r_l2: Optional[float] = None

    def __post_init__(self):
        if self.family not in ("sparse", "gradient_sparse", "unit_sphere", "support"):
            raise InvalidParameterError(f"unknown signal family {self.family!r}")
        if self.p < 1:
            raise InvalidDimensionError("p must be >= 1")
        if not (0.0 < self.delta_sep <= 1.0):
            raise InvalidParameterError("delta_sep must lie in (0, 1]")
        if self.s < 0 or self.s > self.p:
            raise InvalidParameterError("need 0 <= s <= p")
        if self.family == "gradient_sparse" and self.s > self.p - 1:
            raise InvalidParameterError("gradient_sparse needs s <= p-1")


def _sparse_signal(spec: SignalSpec, rng: np.random.Generator) -> np.ndarray:
    r = 1.0 if spec.r_tune is None else float(spec.r_tune)
    if spec.s < 1:
        raise InvalidParameterError("sparse family needs s >= 1")
    for _ in range(_MAX_REJECTION_TRIES):
        x = np.zeros(spec.p)
        support = rng.choice(spec.p, size=spec.s, replace=False)
        mags = np.abs(rng.standard_normal(spec.s))
        total = mags.sum()
        if total <= 0.0:
            continue
        x[support] = rng.choice([-1.0, 1.0], size=spec.s) * (mags / total) * r
        if spec.r_l2 is None or np.linalg.norm(x) <= spec.r_l2:
            return x
    raise ConstraintInfeasibleError(
        f"could not draw a sparse signal with ||x||_1={r} and ||x||_2<={spec.r_l2}"
    )


def _jump_positions(spec: SignalSpec, rng: np.random.Generator) -> np.ndarray:
    p, s = spec.p, spec.s
    gap = int(np.floor(spec.delta_sep * p / (s + 1)))
    if gap < 1:
        raise ConstraintInfeasibleError(
            f"separation infeasible: floor(delta*p/(s+1)) = {gap} < 1"
        )
    base = np.round(np.arange(1, s + 1) * p / (s + 1)).astype(int)
    slack = int(np.floor(p / (s + 1))) - gap
    jitter_amp = slack // 2
    if jitter_amp > 0:
        base = base + rng.integers(-jitter_amp, jitter_amp + 1, size=s)
    return np.clip(np.sort(base), 1, p - 1)


def _gradient_sparse_signal(spec: SignalSpec, rng: np.random.Generator) -> np.ndarray:
    p = spec.p
    cap = 1.0 if spec.r_l2 is None else float(spec.r_l2)
    if spec.s == 0:
        level = rng.standard_normal()
        if spec.r_tune not in (None, 0.0):
            raise ConstraintInfeasibleError("s=0 forces ||Dx||_1 = 0")
        x = np.full(p, level if level != 0.0 else 1.0)
        return x / np.linalg.norm(x) * cap
    for _ in range(_MAX_REJECTION_TRIES):
        pos = _jump_positions(spec, rng)
        levels = rng.standard_normal(spec.s + 1)
        seg = np.diff(np.concatenate(([0], pos, [p])))
        x = np.repeat(levels, seg)
        x = x - x.mean()
        nrm = np.linalg.norm(x)
        if nrm <= 0.0:
            continue
        u = x / nrm                      # ||u||_2 = 1, zero mean
        rho = np.abs(np.diff(u)).sum()
        if spec.r_tune is None:
            return cap * u
        r = float(spec.r_tune)
        # both constraints bind only if r <= rho * cap; otherwise redraw
        if r <= rho * cap:
            return (r / rho) * u
    raise ConstraintInfeasibleError(
        f"no gradient-sparse draw with ||Dx||_1={spec.r_tune} inside the l2 ball "
        f"of radius {cap}; lower r_tune (roughly r <= 2*s/sqrt(p))"
    )


def _unit_sphere_signal(spec: SignalSpec, rng: np.random.Generator) -> np.ndarray:
    r = 1.0 if spec.r_l2 is None else float(spec.r_l2)
    s = spec.s if spec.s >= 1 else spec.p
    x = np.zeros(spec.p)
    support = rng.choice(spec.p, size=s, replace=False)
    while True:
        vals = rng.standard_normal(s)
        if np.linalg.norm(vals) > 0:
            break
    x[support] = vals
    return x / np.linalg.norm(x) * r


def gen_signal(spec: SignalSpec, seed: int):
    """Draw a structured signal; returns a sorted index array for "support".

    Deterministic given ``(spec, seed)``.  Tuning norms are hit exactly:
    ``||x||_1 = r_tune`` for sparse, ``||Dx||_1 = r_tune`` for gradient-sparse
    (rejection sampling keeps ``||x||_2`` within its bound at the same time).
    """
    rng = rng_from(seed, "signal", spec.family)
    if spec.family == "sparse":
        return _sparse_signal(spec, rng)
    if spec.family == "gradient_sparse":
        return _gradient_sparse_signal(spec, rng)
    if spec.family == "unit_sphere":
        return _unit_sphere_signal(spec, rng)
    # support: an index set S subset [p], |S| <= s
    return np.sort(rng.choice(spec.p, size=spec.s, replace=False))


def diff_operator(p: int) -> np.ndarray:
    """Forward-difference matrix D of shape (p-1, p)."""
    d = np.zeros((p - 1, p))
    idx = np.arange(p - 1)
    d[idx, idx] = -1.0
    d[idx, idx + 1] = 1.0
    return d


def tv_seminorm(x: np.ndarray) -> float:
    """||Dx||_1, the discrete total variation."""
    x = np.asarray(x, dtype=float)
    return float(np.abs(np.diff(x)).sum()) if x.size > 1 else 0.0


# ---------------------------------------------------------------------------
# measurement ensembles
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MeasurementEnsemble:
    """Law of one measurement row: centered, isotropic, sub-Gaussian.

    ``subg_param`` records the sub-Gaussian proxy L >= 1; it is informational
    and never enters the generators.
    """

    law: str
    p: int
    subg_param: float = 1.0

    def __post_init__(self):
        if self.law not in ("gaussian", "rademacher", "uniform_scaled"):
            raise InvalidParameterError(f"unknown ensemble law {self.law!r}")
        if self.p < 1:
            raise InvalidDimensionError("p must be >= 1")
        if self.subg_param < 1.0:
            raise InvalidParameterError("subg_param must be >= 1")


@dataclass(frozen=True)
class MeasurementMatrix:
    """Dense measurement matrix; rows are i.i.d. draws from an ensemble."""

    entries: np.ndarray

    @property
    def m(self) -> int:
        return self.entries.shape[0]

    @property
    def p(self) -> int:
        return self.entries.shape[1]


def gen_matrix(ens: MeasurementEnsemble, m: int, seed: int) -> MeasurementMatrix:
    """Sample m i.i.d. rows from the ensemble.  Entries have unit variance."""
    if m < 1:
        raise InvalidDimensionError("m must be >= 1")
    rng = rng_from(seed, "matrix", ens.law)
    if ens.law == "gaussian":
        a = rng.standard_normal((m, ens.p))
    elif ens.law == "rademacher":
        a = rng.choice([-1.0, 1.0], size=(m, ens.p))
    else:  # uniform on [-sqrt(3), sqrt(3)] has unit variance
        a = rng.uniform(-np.sqrt(3.0), np.sqrt(3.0), size=(m, ens.p))
    return MeasurementMatrix(entries=a)


# ---------------------------------------------------------------------------
# observation models
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Linear:
    tag = "linear"


@dataclass(frozen=True)
class LinearGaussNoise:
    sigma: float
    tag = "linear_gauss"

    def __post_init__(self):
        if self.sigma < 0:
            raise InvalidParameterError("sigma must be >= 0")


@dataclass(frozen=True)
class OneBit:
    tag = "one_bit"


@dataclass(frozen=True)
class OneBitDither:
    lam: float
    tag = "one_bit_dither"

    def __post_init__(self):
        if self.lam <= 0:
            raise InvalidParameterError("lam must be > 0")


@dataclass(frozen=True)
class MultiBitDither:
    delta: float
    tag = "multi_bit_dither"

    def __post_init__(self):
        if self.delta <= 0:
            raise InvalidParameterError("delta must be > 0")


@dataclass(frozen=True)
class Modulo:
    lam: float
    tag = "modulo"

    def __post_init__(self):
        if self.lam <= 0:
            raise InvalidParameterError("lam must be > 0")


@dataclass(frozen=True)
class Sim:
    """Single-index model y = f(<a, x>) with scalar non-linearity ``f``."""

    f: Callable[[np.ndarray], np.ndarray]
    gamma: float = 1.0          # Lipschitz constant of f, informational
    name: str = "custom"
    tag = "sim"


def _coordwise_default(v: np.ndarray) -> np.ndarray:
    return v + 0.5 * np.tanh(v)


@dataclass(frozen=True)
class CoordWise:
    """Coordinate-wise distorted dot product y = sum_j f_j(a_j * x_j).

    The default component function f(v) = v + tanh(v)/2 is odd, 1.5-Lipschitz
    and satisfies alpha*(v - v') <= f(v) - f(v') and beta1*v <= f(v) <= beta2*v
    (v >= 0) with alpha = beta1 = 1, beta2 = gamma = 1.5.
    """

    f: Callable[[np.ndarray], np.ndarray] = _coordwise_default
    alpha: float = 1.0
    beta1: float = 1.0
    beta2: float = 1.5
    gamma: float = 1.5
    tag = "coord_wise"

    def __post_init__(self):
        if not (0.0 < self.alpha <= 1.0):
            raise InvalidParameterError("need 0 < alpha <= 1")
        if not (self.beta2 >= self.beta1 > 0.0):
            raise InvalidParameterError("need beta2 >= beta1 > 0")


@dataclass(frozen=True)
class VarSelect:
    """Variable-selection model y = f(a_S) on an index set S.

    ``f_name`` picks the aggregation: "linear" is f(a_S) = sum_{j in S} a_j/sqrt(s),
    "tanh" replaces each a_j by tanh(a_j).  (alpha, beta, gamma, kappa) are the
    balancing parameters of the model, recorded for diagnostics.
    """

    f_name: str = "linear"
    alpha: float = 1.0
    beta: float = 1.0
    gamma: float = 2.0
    kappa: float = 2.0
    tag = "var_select"

    def __post_init__(self):
        if self.f_name not in ("linear", "tanh"):
            raise InvalidParameterError("f_name must be 'linear' or 'tanh'")


ObservationModel = Union[
    Linear, LinearGaussNoise, OneBit, OneBitDither, MultiBitDither,
    Modulo, Sim, CoordWise, VarSelect,
]


# ---------------------------------------------------------------------------
# constraint sets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class L1Ball:
    radius: float
    tag = "l1ball"

    def __post_init__(self):
        if self.radius <= 0:
            raise InvalidParameterError("radius must be > 0")


@dataclass(frozen=True)
class L2Ball:
    radius: float
    tag = "l2ball"

    def __post_init__(self):
        if self.radius <= 0:
            raise InvalidParameterError("radius must be > 0")


@dataclass(frozen=True)
class TVBall:
    """{x : ||Dx||_1 <= radius} with D the forward-difference operator."""

    radius: float
    tag = "tvball"

    def __post_init__(self):
        if self.radius <= 0:
            raise InvalidParameterError("radius must be > 0")


@dataclass(frozen=True)
class Box:
    lo: float
    hi: float
    tag = "box"

    def __post_init__(self):
        if not self.lo < self.hi:
            raise InvalidParameterError("need lo < hi")


@dataclass(frozen=True)
class FullSpace:
    tag = "fullspace"


ConstraintSet = Union[L1Ball, L2Ball, TVBall, Box, FullSpace]


# ---------------------------------------------------------------------------
# corruption recipe
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CorruptionSpec:
    """Adversarial noise recipe applied on top of clean observations.

    bitflip_frac      : fraction beta of sign entries to flip (binary models)
    l2_budget         : target value of (sum(nu^2)/m)^{1/2}; in "aligned" mode
                        it is the per-entry factor of <a_i, x> instead
    gross_outliers    : number of entries perturbed by +-outlier_magnitude
    adversarial_mode  : "random" or "aligned"
    """

    bitflip_frac: float = 0.0
    l2_budget: float = 0.0
    gross_outliers: int = 0
    outlier_magnitude: float = 0.0
    adversarial_mode: str = "random"

    def __post_init__(self):
        if not (0.0 <= self.bitflip_frac <= 1.0):
            raise InvalidParameterError("bitflip_frac must lie in [0, 1]")
        if self.l2_budget < 0:
            raise InvalidParameterError("l2_budget must be >= 0")
        if self.gross_outliers < 0:
            raise InvalidParameterError("gross_outliers must be >= 0")
        if self.adversarial_mode not in ("random", "aligned"):
            raise InvalidParameterError("adversarial_mode must be 'random' or 'aligned'")

    def is_empty(self) -> bool:
        return (
            self.bitflip_frac == 0.0
            and self.l2_budget == 0.0
            and self.gross_outliers == 0
        )


# ---------------------------------------------------------------------------
# target maps
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ScaleBy:
    mu: float
    tag = "scale_by"


@dataclass(frozen=True)
class NormalizeScale:
    mu: float
    tag = "normalize_scale"


@dataclass(frozen=True)
class IdentityMap:
    tag = "identity"


@dataclass
class MonteCarloTarget:
    """Estimates T x = E[y(x) a] with fresh samples; caches value and stderr."""

    model: ObservationModel
    ens: MeasurementEnsemble
    n: int = 100_000
    seed: int = 0
    last_stderr: Optional[float] = field(default=None, compare=False)
    tag = "monte_carlo"


TargetMap = Union[ScaleBy, NormalizeScale, IdentityMap, MonteCarloTarget]


def target_of(tmap: TargetMap, x) -> np.ndarray:
    """Apply a target map to a signal.

    For ``MonteCarloTarget`` the estimate of E[y(x) a] is returned and the
    (conservative, 1.96-scaled) standard error is stored on ``tmap.last_stderr``.
    """
    if isinstance(tmap, IdentityMap):
        return np.asarray(x, dtype=float).copy()
    if isinstance(tmap, ScaleBy):
        return tmap.mu * np.asarray(x, dtype=float)
    if isinstance(tmap, NormalizeScale):
        x = np.asarray(x, dtype=float)
        nrm = np.linalg.norm(x)
        if nrm == 0.0:
            raise DegenerateInputError("cannot normalize the zero vector")
        return tmap.mu * x / nrm
    if isinstance(tmap, MonteCarloTarget):
        # local import; observe depends on this module
        from .observe import observe

        a = gen_matrix(tmap.ens, tmap.n, seed=tmap.seed)
        y = observe(tmap.model, a, x, seed=tmap.seed)
        prods = y[:, None] * a.entries
        est = prods.mean(axis=0)
        se = 1.96 * prods.std(axis=0, ddof=1) / np.sqrt(tmap.n)
        tmap.last_stderr = float(np.linalg.norm(se))
        return est
    raise InvalidParameterError(f"unknown target map {tmap!r}")
