import numpy as np
import pytest

from nlcs.errors import (
    ConstraintInfeasibleError,
    DegenerateInputError,
    InvalidDimensionError,
    InvalidParameterError,
)
from nlcs.model import (
    IdentityMap,
    MeasurementEnsemble,
    MonteCarloTarget,
    NormalizeScale,
    ScaleBy,
    SignalSpec,
    VarSelect,
    gen_matrix,
    gen_signal,
    target_of,
    tv_seminorm,
)

LAWS = ["gaussian", "rademacher", "uniform_scaled"]


# ---------------------------------------------------------------------------
# signal generation
# ---------------------------------------------------------------------------

def test_sparse_one_sparse_is_signed_basis_vector():
    spec = SignalSpec(family="sparse", p=4, s=1, r_tune=1.0)
    x = gen_signal(spec, seed=3)
    assert np.count_nonzero(x) == 1
    assert abs(np.abs(x).sum() - 1.0) < 1e-15
    assert set(np.abs(x)) <= {0.0, 1.0}


def test_sparse_contract_on_100_seeds():
    spec = SignalSpec(family="sparse", p=64, s=5, r_tune=3.0)
    for seed in range(100):
        x = gen_signal(spec, seed)
        assert np.count_nonzero(x) <= 5
        assert abs(np.abs(x).sum() - 3.0) <= 1e-12 * 3.0


def test_gradient_sparse_zero_jumps_is_constant():
    spec = SignalSpec(family="gradient_sparse", p=6, s=0, r_tune=0.0)
    x = gen_signal(spec, seed=0)
    assert np.ptp(x) == 0.0
    assert tv_seminorm(x) == 0.0


def test_gradient_sparse_contract_on_100_seeds():
    p, s, delta, r = 64, 3, 0.8, 0.3
    spec = SignalSpec(family="gradient_sparse", p=p, s=s, delta_sep=delta, r_tune=r)
    min_gap = int(np.floor(delta * p / (s + 1)))
    for seed in range(100):
        x = gen_signal(spec, seed)
        jumps = np.nonzero(np.diff(x))[0] + 1
        assert jumps.size <= s
        bounds = np.concatenate(([0], jumps, [p]))
        assert np.diff(bounds).min() >= min_gap
        assert abs(tv_seminorm(x) - r) <= 1e-12 * r
        assert np.linalg.norm(x) <= 1.0 + 1e-12


def test_gradient_sparse_infeasible_separation():
    # floor(delta*p/(s+1)) = 0
    spec = SignalSpec(family="gradient_sparse", p=10, s=9, delta_sep=0.5)
    with pytest.raises(ConstraintInfeasibleError):
        gen_signal(spec, seed=0)


def test_unit_sphere_signal():
    spec = SignalSpec(family="unit_sphere", p=32, s=3)
    for seed in range(20):
        x = gen_signal(spec, seed)
        assert np.count_nonzero(x) == 3
        assert abs(np.linalg.norm(x) - 1.0) < 1e-12


def test_support_signal():
    spec = SignalSpec(family="support", p=20, s=4)
    idx = gen_signal(spec, seed=1)
    assert idx.size == 4
    assert np.all(np.diff(idx) > 0)
    assert idx.min() >= 0 and idx.max() < 20


def test_generator_determinism():
    spec = SignalSpec(family="sparse", p=32, s=4, r_tune=2.0)
    np.testing.assert_array_equal(gen_signal(spec, 7), gen_signal(spec, 7))
    assert not np.array_equal(gen_signal(spec, 7), gen_signal(spec, 8))


def test_signal_spec_validation():
    with pytest.raises(InvalidParameterError):
        SignalSpec(family="nope", p=4, s=1)
    with pytest.raises(InvalidParameterError):
        SignalSpec(family="sparse", p=4, s=5)
    with pytest.raises(InvalidParameterError):
        SignalSpec(family="gradient_sparse", p=4, s=4)


# ---------------------------------------------------------------------------
# measurement ensembles
# ---------------------------------------------------------------------------

def test_rademacher_unit_second_moment():
    ens = MeasurementEnsemble(law="rademacher", p=1)
    a = gen_matrix(ens, 1000, seed=0).entries
    assert set(np.unique(a)) == {-1.0, 1.0}
    assert abs(np.mean(a**2) - 1.0) < 0.1


def test_gaussian_empirical_covariance():
    ens = MeasurementEnsemble(law="gaussian", p=2)
    a = gen_matrix(ens, 10_000, seed=1).entries
    cov = a.T @ a / a.shape[0]
    assert np.abs(cov - np.eye(2)).max() < 0.05


@pytest.mark.parametrize("law", LAWS)
def test_isotropy_all_laws(law):
    # empirical covariance within 5*p/sqrt(n) of identity in max-entry norm
    p, n = 8, 100_000
    ens = MeasurementEnsemble(law=law, p=p)
    a = gen_matrix(ens, n, seed=2).entries
    cov = a.T @ a / n
    assert np.abs(cov - np.eye(p)).max() < 5.0 * p / np.sqrt(n)
    assert np.abs(a.mean(axis=0)).max() < 5.0 / np.sqrt(n)


def test_matrix_determinism_and_errors():
    ens = MeasurementEnsemble(law="gaussian", p=3)
    np.testing.assert_array_equal(
        gen_matrix(ens, 11, seed=5).entries, gen_matrix(ens, 11, seed=5).entries
    )
    with pytest.raises(InvalidDimensionError):
        gen_matrix(ens, 0, seed=0)
    with pytest.raises(InvalidParameterError):
        MeasurementEnsemble(law="poisson", p=3)


# ---------------------------------------------------------------------------
# target maps
# ---------------------------------------------------------------------------

def test_target_normalize_scale():
    mu = np.sqrt(2.0 / np.pi)
    out = target_of(NormalizeScale(mu), np.array([3.0, 0.0]))
    np.testing.assert_allclose(out, [mu, 0.0], atol=1e-15)
    with pytest.raises(DegenerateInputError):
        target_of(NormalizeScale(mu), np.zeros(2))


def test_target_scale_and_identity():
    np.testing.assert_array_equal(
        target_of(ScaleBy(0.5), np.array([2.0, 4.0])), [1.0, 2.0]
    )
    x = np.array([1.0, -1.0])
    np.testing.assert_array_equal(target_of(IdentityMap(), x), x)


def test_monte_carlo_target_var_select():
    # f(a_S) = sum_{j in S} a_j / sqrt(s): E[f(a_S) a] = 1_S / sqrt(s)
    p = 6
    ens = MeasurementEnsemble(law="gaussian", p=p)
    tmap = MonteCarloTarget(model=VarSelect(f_name="linear"), ens=ens, n=200_000, seed=3)
    s_set = np.array([1, 3])
    tx = target_of(tmap, s_set)
    expected = np.zeros(p)
    expected[s_set] = 1.0 / np.sqrt(2.0)
    assert tmap.last_stderr is not None
    assert np.linalg.norm(tx - expected) <= 3.0 * tmap.last_stderr
