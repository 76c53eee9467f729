"""nlcs: a lab for uniform signal recovery from non-linear random measurements.

Generates structured signals and sub-Gaussian measurement ensembles, applies
quantized / clipped / distorted observation models with adversarial
corruption, reconstructs with a constrained least-squares estimator
(projected gradient descent), and estimates the geometric and statistical
quantities that govern the recovery error.
"""

from .analysis import (
    MismatchEstimate,
    ScalarTarget,
    WidthEstimate,
    conic_width_proxy,
    decoupling_probe,
    direction_error,
    fit_rate,
    local_stability_probe,
    mean_width_global,
    mean_width_local,
    mu_scalar,
    support_recover,
    tail_norm,
    target_mismatch,
    top_norm,
)
from .geometry import ProjectionResult, project, support_max, tv_prox
from .harness import (
    CONFIG_SCHEMA,
    ExperimentConfig,
    TrialRecord,
    run_experiment,
    summarize,
)
from .model import (
    Box,
    ConstraintSet,
    CoordWise,
    CorruptionSpec,
    FullSpace,
    IdentityMap,
    L1Ball,
    L2Ball,
    Linear,
    LinearGaussNoise,
    MeasurementEnsemble,
    MeasurementMatrix,
    Modulo,
    MonteCarloTarget,
    MultiBitDither,
    NormalizeScale,
    ObservationModel,
    OneBit,
    OneBitDither,
    ScaleBy,
    SignalSpec,
    Sim,
    TVBall,
    TargetMap,
    VarSelect,
    gen_matrix,
    gen_signal,
    target_of,
    tv_seminorm,
)
from .observe import (
    ObservationBatch,
    corrupt,
    modulo_val,
    observe,
    observe_batch,
    sign_val,
    uniform_quantize,
)
from .seeds import derive_seed, rng_from
from .solver import (
    GeneralizedLasso,
    SolveDiagnostics,
    SolveOptions,
    solve_lasso,
    spectral_norm_sq,
)

__version__ = "0.1.0"
