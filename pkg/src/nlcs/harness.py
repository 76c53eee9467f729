"""Config-driven experiment orchestration and persistence.

A JSON experiment config describes the observation model, measurement
ensemble, signal family, constraint set, sample-size grid, corruption recipe,
and solver options.  ``run_experiment`` executes trials * |m_grid| recovery
problems, each deterministically seeded by a stable mix of
(master_seed, m, trial), and writes one CSV row per trial atomically.

Per-trial seed streams: "signal", "matrix", "observe", "corrupt"; rows are
ordered by (m, trial) regardless of thread count.
"""

from __future__ import annotations

import json
import os
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import List, Optional, Sequence, Tuple

import jsonschema
import numpy as np
import pandas as pd

from .analysis import direction_error, fit_rate, mu_scalar, support_recover
from .errors import ConfigError, FitImpossibleError, InvalidParameterError
from .model import (
    Box,
    ConstraintSet,
    CoordWise,
    CorruptionSpec,
    FullSpace,
    L1Ball,
    L2Ball,
    Linear,
    LinearGaussNoise,
    MeasurementEnsemble,
    Modulo,
    MonteCarloTarget,
    MultiBitDither,
    ObservationModel,
    OneBit,
    OneBitDither,
    SignalSpec,
    Sim,
    TVBall,
    VarSelect,
    gen_matrix,
    gen_signal,
    target_of,
    tv_seminorm,
)
from .observe import observe_batch
from .seeds import derive_seed
from .solver import SolveOptions, solve_lasso

__all__ = [
    "CONFIG_SCHEMA",
    "DEFAULT_M_GRID",
    "ExperimentConfig",
    "TrialRecord",
    "CSV_COLUMNS",
    "run_experiment",
    "write_records",
    "summarize",
]

DEFAULT_M_GRID = [100, 200, 400, 800, 1600, 3200]   # log-spaced, 6 points

CONFIG_SCHEMA = {
    "type": "object",
    "required": ["model", "signal", "constraint", "trials", "master_seed"],
    "additionalProperties": False,
    "properties": {
        "model": {
            "type": "object",
            "required": ["kind"],
            "properties": {
                "kind": {
                    "enum": [
                        "linear", "linear_gauss", "one_bit", "one_bit_dither",
                        "multi_bit_dither", "modulo", "coord_wise", "var_select",
                    ]
                },
                "sigma": {"type": "number", "minimum": 0},
                "lam": {"type": "number", "exclusiveMinimum": 0},
                "delta": {"type": "number", "exclusiveMinimum": 0},
                "f": {"enum": ["linear", "tanh"]},
            },
        },
        "ensemble": {
            "type": "object",
            "properties": {
                "law": {"enum": ["gaussian", "rademacher", "uniform_scaled"]},
                "subg_param": {"type": "number", "minimum": 1},
            },
        },
        "signal": {
            "type": "object",
            "required": ["family", "p", "s"],
            "properties": {
                "family": {"enum": ["sparse", "gradient_sparse", "unit_sphere", "support"]},
                "p": {"type": "integer", "minimum": 1},
                "s": {"type": "integer", "minimum": 0},
                "delta_sep": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                "r_tune": {"type": ["number", "null"]},
                "r_l2": {"type": ["number", "null"]},
            },
        },
        "constraint": {
            "type": "object",
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["l1ball", "l2ball", "tvball", "box", "fullspace"]},
                "radius": {
                    "oneOf": [{"type": "number", "exclusiveMinimum": 0}, {"const": "tuned"}]
                },
                "lo": {"type": "number"},
                "hi": {"type": "number"},
            },
        },
        "m_grid": {
            "type": "array",
            "items": {"type": "integer", "minimum": 1},
            "minItems": 1,
        },
        "trials": {"type": "integer", "minimum": 1},
        "corruption": {
            "type": "object",
            "properties": {
                "bitflip_frac": {"type": "number", "minimum": 0, "maximum": 1},
                "l2_budget": {"type": "number", "minimum": 0},
                "gross_outliers": {"type": "integer", "minimum": 0},
                "outlier_magnitude": {"type": "number"},
                "adversarial_mode": {"enum": ["random", "aligned"]},
            },
        },
        "solver": {
            "type": "object",
            "properties": {
                "max_iters": {"type": "integer", "minimum": 1},
                "rel_tol": {"type": "number", "exclusiveMinimum": 0},
                "step_rule": {"enum": ["fixed", "backtracking"]},
                "safety_factor": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
            },
        },
        "master_seed": {"type": "integer"},
        "accuracy_target": {"type": "number", "exclusiveMinimum": 0},
        "output": {"type": "string"},
    },
}

CSV_COLUMNS = [
    "model", "p", "s", "m", "trial", "seed",
    "err_l2", "err_direction", "support_match",
    "iterations", "converged", "wall_ms",
]


@dataclass(frozen=True)
class TrialRecord:
    model: str
    p: int
    s: int
    m: int
    trial: int
    seed: int
    err_l2: float
    err_direction: float
    support_match: bool
    iterations: int
    converged: bool
    # wall-clock telemetry; excluded from the determinism contract
    wall_ms: float = field(compare=False, default=0.0)

    def row(self) -> list:
        d = asdict(self)
        return [d[c] for c in CSV_COLUMNS]


@dataclass
class ExperimentConfig:
    model: dict
    signal: dict
    constraint: dict
    trials: int
    master_seed: int
    m_grid: List[int] = field(default_factory=lambda: list(DEFAULT_M_GRID))
    ensemble: dict = field(default_factory=lambda: {"law": "gaussian"})
    corruption: dict = field(default_factory=dict)
    solver: dict = field(default_factory=dict)
    accuracy_target: Optional[float] = None
    output: Optional[str] = None

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        try:
            jsonschema.validate(raw, CONFIG_SCHEMA)
        except jsonschema.ValidationError as exc:
            path = "/".join(str(k) for k in exc.absolute_path) or "<root>"
            raise ConfigError(f"config invalid at '{path}': {exc.message}") from exc
        grid = raw.get("m_grid", DEFAULT_M_GRID)
        if sorted(set(grid)) != list(grid):
            raise ConfigError("config invalid at 'm_grid': must be strictly increasing")
        known = {f for f in cls.__dataclass_fields__}
        return cls(**{k: v for k, v in raw.items() if k in known})

    @classmethod
    def from_json(cls, path: str) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        out = {
            "model": self.model,
            "signal": self.signal,
            "constraint": self.constraint,
            "m_grid": list(self.m_grid),
            "trials": self.trials,
            "master_seed": self.master_seed,
            "ensemble": self.ensemble,
            "corruption": self.corruption,
            "solver": self.solver,
        }
        if self.accuracy_target is not None:
            out["accuracy_target"] = self.accuracy_target
        if self.output is not None:
            out["output"] = self.output
        return out


# ---------------------------------------------------------------------------
# object construction from config dictionaries
# ---------------------------------------------------------------------------

def build_model(spec: dict) -> ObservationModel:
    kind = spec["kind"]
    if kind == "linear":
        return Linear()
    if kind == "linear_gauss":
        return LinearGaussNoise(sigma=spec.get("sigma", 0.0))
    if kind == "one_bit":
        return OneBit()
    if kind == "one_bit_dither":
        return OneBitDither(lam=spec["lam"])
    if kind == "multi_bit_dither":
        return MultiBitDither(delta=spec["delta"])
    if kind == "modulo":
        return Modulo(lam=spec["lam"])
    if kind == "coord_wise":
        return CoordWise()
    if kind == "var_select":
        return VarSelect(f_name=spec.get("f", "linear"))
    raise ConfigError(f"unknown model kind {kind!r}")


def build_signal_spec(spec: dict) -> SignalSpec:
    return SignalSpec(
        family=spec["family"],
        p=spec["p"],
        s=spec["s"],
        delta_sep=spec.get("delta_sep", 1.0),
        r_tune=spec.get("r_tune"),
        r_l2=spec.get("r_l2"),
    )


def build_ensemble(spec: dict, p: int) -> MeasurementEnsemble:
    return MeasurementEnsemble(
        law=spec.get("law", "gaussian"), p=p, subg_param=spec.get("subg_param", 1.0)
    )


def build_corruption(spec: dict) -> CorruptionSpec:
    return CorruptionSpec(
        bitflip_frac=spec.get("bitflip_frac", 0.0),
        l2_budget=spec.get("l2_budget", 0.0),
        gross_outliers=spec.get("gross_outliers", 0),
        outlier_magnitude=spec.get("outlier_magnitude", 0.0),
        adversarial_mode=spec.get("adversarial_mode", "random"),
    )


def build_solver_options(spec: dict) -> SolveOptions:
    return SolveOptions(
        max_iters=spec.get("max_iters", 5000),
        rel_tol=spec.get("rel_tol", 1e-9),
        step_rule=spec.get("step_rule", "fixed"),
        safety_factor=spec.get("safety_factor", 0.9),
    )


def _tanh_moment(ens: MeasurementEnsemble) -> float:
    """E[tanh(a) a] for one coordinate of the ensemble law."""
    if ens.law == "rademacher":
        return float(np.tanh(1.0))
    if ens.law == "uniform_scaled":
        from scipy import integrate

        b = np.sqrt(3.0)
        val, _ = integrate.quad(lambda u: np.tanh(u) * u / (2 * b), -b, b)
        return float(val)
    return mu_scalar("tanh").mu


def target_vector(model: ObservationModel, ens: MeasurementEnsemble, x, p: int) -> np.ndarray:
    """Default target Tx for each model: the vector the Lasso estimates.

    linear / dithered multi-bit : x itself
    one-bit                     : sqrt(2/pi) * x/||x||
    dithered one-bit            : x / lam
    modulo                      : mu_lam * x  (unit-norm signals)
    single-index f              : mu_f * x    (unit-norm signals)
    coordinate-wise             : E[f(a_j x_j) a_j] per coordinate (Monte Carlo)
    variable selection          : E[f(a_S) a], closed form per aggregation
    """
    if isinstance(model, (Linear, LinearGaussNoise, MultiBitDither)):
        return np.asarray(x, dtype=float).copy()
    if isinstance(model, OneBit):
        xv = np.asarray(x, dtype=float)
        return np.sqrt(2.0 / np.pi) * xv / np.linalg.norm(xv)
    if isinstance(model, OneBitDither):
        return np.asarray(x, dtype=float) / model.lam
    if isinstance(model, Modulo):
        mu = mu_scalar("modulo", lam=model.lam).mu
        return mu * np.asarray(x, dtype=float)
    if isinstance(model, Sim):
        mu = mu_scalar(model.f).mu
        return mu * np.asarray(x, dtype=float)
    if isinstance(model, VarSelect):
        idx = np.asarray(x, dtype=int)
        tx = np.zeros(p)
        if model.f_name == "linear":
            coeff = 1.0 / np.sqrt(idx.size)        # E[a_j^2] = 1 by isotropy
        else:
            coeff = _tanh_moment(ens) / np.sqrt(idx.size)
        tx[idx] = coeff
        return tx
    if isinstance(model, CoordWise):
        tmap = MonteCarloTarget(model=model, ens=ens, n=100_000, seed=7)
        return target_of(tmap, x)
    raise ConfigError(f"no default target for model {model!r}")


def build_constraint(spec: dict, tx: np.ndarray) -> ConstraintSet:
    kind = spec["kind"]
    radius = spec.get("radius", "tuned")
    if kind == "fullspace":
        return FullSpace()
    if kind == "box":
        return Box(lo=spec.get("lo", -1.0), hi=spec.get("hi", 1.0))
    if radius == "tuned":
        if kind == "l1ball":
            radius = float(np.abs(tx).sum())
        elif kind == "l2ball":
            radius = float(np.linalg.norm(tx))
        elif kind == "tvball":
            radius = tv_seminorm(tx)
        if radius <= 0:
            raise ConfigError(f"tuned radius for {kind} degenerates to 0")
    if kind == "l1ball":
        return L1Ball(radius)
    if kind == "l2ball":
        return L2Ball(radius)
    if kind == "tvball":
        return TVBall(radius)
    raise ConfigError(f"unknown constraint kind {kind!r}")


# ---------------------------------------------------------------------------
# experiment execution
# ---------------------------------------------------------------------------

def _true_support(model: ObservationModel, x, s: int) -> Optional[np.ndarray]:
    if isinstance(model, VarSelect):
        return np.sort(np.asarray(x, dtype=int))
    xv = np.asarray(x, dtype=float)
    if xv.ndim != 1 or s < 1 or s > xv.size:
        return None
    return support_recover(xv, s)


def run_trial(cfg: ExperimentConfig, m: int, trial: int) -> TrialRecord:
    seed = derive_seed(cfg.master_seed, m, trial)
    model = build_model(cfg.model)
    sig_spec = build_signal_spec(cfg.signal)
    ens = build_ensemble(cfg.ensemble, sig_spec.p)
    cor = build_corruption(cfg.corruption)
    opts = build_solver_options(cfg.solver)

    t0 = time.perf_counter()
    x = gen_signal(sig_spec, derive_seed(seed, "signal"))
    a = gen_matrix(ens, m, derive_seed(seed, "matrix"))
    tx = target_vector(model, ens, x, sig_spec.p)
    cset = build_constraint(cfg.constraint, tx)
    batch = observe_batch(model, a, x, cor, seed=derive_seed(seed, "observe"))
    z, diag = solve_lasso(a, batch.corrupted, cset, opts)
    wall_ms = (time.perf_counter() - t0) * 1e3

    err_l2 = float(np.linalg.norm(z - tx))
    if isinstance(model, VarSelect) or np.asarray(x).dtype.kind in "iu":
        err_dir = float("nan")
    else:
        err_dir = direction_error(z, np.asarray(x, dtype=float), float(np.linalg.norm(tx)))
    truth = _true_support(model, x, sig_spec.s)
    if truth is None:
        match = False
    else:
        match = bool(np.array_equal(support_recover(z, truth.size), truth))
    return TrialRecord(
        model=model.tag,
        p=sig_spec.p,
        s=sig_spec.s,
        m=m,
        trial=trial,
        seed=seed,
        err_l2=err_l2,
        err_direction=err_dir,
        support_match=match,
        iterations=diag.iterations,
        converged=diag.converged,
        wall_ms=wall_ms,
    )


def run_experiment(
    cfg: ExperimentConfig,
    threads: Optional[int] = None,
    out_path: Optional[str] = None,
) -> List[TrialRecord]:
    """Run all (m, trial) cells; rows are identical regardless of thread count."""
    if threads is None:
        threads = int(os.environ.get("NLCS_THREADS", "1"))
    cells = [(m, t) for m in cfg.m_grid for t in range(cfg.trials)]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            records = list(pool.map(lambda c: run_trial(cfg, *c), cells))
    else:
        records = [run_trial(cfg, m, t) for m, t in cells]
    records.sort(key=lambda r: (r.m, r.trial))
    target = out_path or cfg.output
    if target:
        write_records(records, target)
    return records


def write_records(records: Sequence[TrialRecord], path: str) -> None:
    """Atomic CSV write: temp file in the target directory, then rename."""
    directory = os.path.dirname(os.path.abspath(path)) or "."
    os.makedirs(directory, exist_ok=True)
    frame = pd.DataFrame([r.row() for r in records], columns=CSV_COLUMNS)
    fd, tmp = tempfile.mkstemp(prefix=".nlcs-", suffix=".csv", dir=directory)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            frame.to_csv(fh, index=False)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def summarize(
    csv_path: str,
    group_keys: Sequence[str] = ("model", "p", "s"),
    column: str = "err_direction",
    window: Optional[int] = None,
) -> Tuple[pd.DataFrame, dict]:
    """Per-m medians and quartiles plus a fitted log-log decay slope per group.

    Medians (not means) are the headline statistic: recovery errors at small
    m are heavy-tailed across trials.
    """
    frame = pd.read_csv(csv_path)
    if frame.empty:
        raise InvalidParameterError(f"no rows in {csv_path}")
    missing = [c for c in (*group_keys, "m", column) if c not in frame.columns]
    if missing:
        raise InvalidParameterError(f"missing columns in {csv_path}: {missing}")
    grouped = (
        frame.groupby([*group_keys, "m"])[column]
        .agg(median="median", q25=lambda v: v.quantile(0.25), q75=lambda v: v.quantile(0.75))
        .reset_index()
    )
    slopes = {}
    for key, sub in grouped.groupby(list(group_keys)):
        if not isinstance(key, tuple):
            key = (key,)
        pts = list(zip(sub["m"], sub["median"]))
        try:
            slopes[key] = fit_rate(pts, window=window)
        except FitImpossibleError:
            slopes[key] = float("nan")
    return grouped, slopes
