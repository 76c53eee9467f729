"""Output functions, dithering, and adversarial corruption.

Scalar conventions:

* ``sign_val(0) = +1``
* ``uniform_quantize(v, delta) = (2*ceil(v/(2*delta)) - 1) * delta``, mapping
  each half-open cell ((2k-2)*delta, 2k*delta] to its center (2k-1)*delta
* ``modulo_val(v, lam) = v - floor((v + lam)/(2*lam)) * 2*lam`` in [-lam, lam)

Dither streams are derived from ``(seed, "dither")`` so they are independent
of the measurement matrix, which is drawn under a different seed label.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import (
    DimensionMismatchError,
    InvalidParameterError,
    ModelMismatchError,
)
from .model import (
    CoordWise,
    CorruptionSpec,
    Linear,
    LinearGaussNoise,
    MeasurementMatrix,
    Modulo,
    MultiBitDither,
    ObservationModel,
    OneBit,
    OneBitDither,
    Sim,
    VarSelect,
)
from .seeds import rng_from

__all__ = [
    "sign_val",
    "uniform_quantize",
    "modulo_val",
    "observe",
    "corrupt",
    "ObservationBatch",
    "observe_batch",
]

_BINARY_MODELS = (OneBit, OneBitDither)


def sign_val(u):
    """Sign with the convention sign(0) = +1; works element-wise."""
    return np.where(np.asarray(u, dtype=float) >= 0.0, 1.0, -1.0)


def uniform_quantize(v, delta: float):
    """Uniform quantizer onto the grid delta*(2Z - 1) with resolution delta."""
    if delta <= 0:
        raise InvalidParameterError("delta must be > 0")
    v = np.asarray(v, dtype=float)
    return (2.0 * np.ceil(v / (2.0 * delta)) - 1.0) * delta


def modulo_val(v, lam: float):
    """Centered modulo: wraps v into [-lam, lam), 2*lam-periodic."""
    if lam <= 0:
        raise InvalidParameterError("lam must be > 0")
    v = np.asarray(v, dtype=float)
    return v - np.floor((v + lam) / (2.0 * lam)) * (2.0 * lam)


def _as_matrix(a) -> np.ndarray:
    if isinstance(a, MeasurementMatrix):
        return a.entries
    return np.asarray(a, dtype=float)


def _observe_impl(model: ObservationModel, a: np.ndarray, x, seed: int):
    """Returns (clean observations, realized dither or None)."""
    m, p = a.shape
    if isinstance(model, VarSelect):
        idx = np.asarray(x, dtype=int)
        if idx.size == 0:
            raise DimensionMismatchError("index set is empty")
        if idx.min() < 0 or idx.max() >= p:
            raise DimensionMismatchError("index set out of range for the matrix")
        cols = a[:, idx]
        if model.f_name == "tanh":
            cols = np.tanh(cols)
        return cols.sum(axis=1) / np.sqrt(idx.size), None

    x = np.asarray(x, dtype=float)
    if x.shape != (p,):
        raise DimensionMismatchError(f"signal has shape {x.shape}, expected ({p},)")

    if isinstance(model, Linear):
        return a @ x, None
    if isinstance(model, LinearGaussNoise):
        tau = rng_from(seed, "dither").standard_normal(m) * model.sigma
        return a @ x + tau, tau
    if isinstance(model, OneBit):
        return sign_val(a @ x), None
    if isinstance(model, OneBitDither):
        tau = rng_from(seed, "dither").uniform(-model.lam, model.lam, size=m)
        return sign_val(a @ x + tau), tau
    if isinstance(model, MultiBitDither):
        tau = rng_from(seed, "dither").uniform(-model.delta, model.delta, size=m)
        return uniform_quantize(a @ x + tau, model.delta), tau
    if isinstance(model, Modulo):
        return modulo_val(a @ x, model.lam), None
    if isinstance(model, Sim):
        return np.asarray(model.f(a @ x), dtype=float), None
    if isinstance(model, CoordWise):
        return np.asarray(model.f(a * x[None, :]), dtype=float).sum(axis=1), None
    raise InvalidParameterError(f"unknown observation model {model!r}")


def observe(model: ObservationModel, a, x, seed: int = 0) -> np.ndarray:
    """Clean observation vector of the signal ``x`` under ``model``.

    Entry i applies the model's output function to (a_i, x).  Any dither is
    realized i.i.d. from its declared law, independently of the matrix.
    """
    return _observe_impl(model, _as_matrix(a), x, seed)[0]


@dataclass
class CorruptionLog:
    """Where and how noise was injected; budgets are reproduced exactly."""

    flipped: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=int))
    outliers: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=int))
    outlier_magnitude: float = 0.0
    l2_mode: str = "none"                 # "none" | "random" | "aligned"
    l2_norm_per_sqrt_m: float = 0.0       # realized (sum nu^2 / m)^{1/2}


def corrupt(
    clean: np.ndarray,
    spec: CorruptionSpec,
    model: ObservationModel,
    x,
    a,
    seed: int = 0,
):
    """Apply the corruption recipe to a clean observation vector.

    Returns ``(corrupted, log)``.  Bit flips negate exactly floor(beta*m)
    entries (difference entries in {-2, +2}) and require a binary model.
    Random l2 noise is normalized so that (sum(nu^2)/m)^{1/2} equals the
    declared budget exactly; aligned noise is budget * <a_i, x> per entry.
    Gross outliers add +-outlier_magnitude to exactly ``gross_outliers``
    entries.
    """
    y = np.asarray(clean, dtype=float).copy()
    m = y.size
    log = CorruptionLog()
    rng = rng_from(seed, "corrupt")

    n_flip = int(np.floor(spec.bitflip_frac * m))
    if spec.bitflip_frac > 0:
        if not isinstance(model, _BINARY_MODELS):
            raise ModelMismatchError("bit flips require a binary observation model")
        if n_flip > 0:
            idx = rng.choice(m, size=n_flip, replace=False)
            y[idx] = -y[idx]
            log.flipped = np.sort(idx)

    if spec.gross_outliers > 0:
        if spec.gross_outliers > m:
            raise InvalidParameterError("gross_outliers exceeds m")
        idx = rng.choice(m, size=spec.gross_outliers, replace=False)
        y[idx] += rng.choice([-1.0, 1.0], size=idx.size) * spec.outlier_magnitude
        log.outliers = np.sort(idx)
        log.outlier_magnitude = spec.outlier_magnitude

    if spec.l2_budget > 0:
        if spec.adversarial_mode == "aligned":
            xv = np.asarray(x, dtype=float)
            if xv.ndim != 1 or xv.size != _as_matrix(a).shape[1]:
                raise ModelMismatchError("aligned corruption needs a vector signal")
            nu = spec.l2_budget * (_as_matrix(a) @ xv)
            log.l2_mode = "aligned"
        else:
            direction = rng.standard_normal(m)
            nu = direction * (spec.l2_budget * np.sqrt(m) / np.linalg.norm(direction))
            log.l2_mode = "random"
        y += nu
        log.l2_norm_per_sqrt_m = float(np.sqrt(np.mean(nu**2)))

    return y, log


@dataclass(frozen=True)
class ObservationBatch:
    """One trial's observations: clean, corrupted, realized dither, and log."""

    clean: np.ndarray
    corrupted: np.ndarray
    dither: Optional[np.ndarray]
    corruption_log: CorruptionLog


def observe_batch(
    model: ObservationModel,
    a,
    x,
    spec: Optional[CorruptionSpec] = None,
    seed: int = 0,
) -> ObservationBatch:
    """Observe then corrupt, capturing the realized dither."""
    mat = _as_matrix(a)
    clean, dither = _observe_impl(model, mat, x, seed)
    if spec is None or spec.is_empty():
        return ObservationBatch(clean, clean.copy(), dither, CorruptionLog())
    corrupted, log = corrupt(clean, spec, model, x, mat, seed)
    return ObservationBatch(clean, corrupted, dither, log)
