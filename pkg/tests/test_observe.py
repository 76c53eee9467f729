import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nlcs.errors import InvalidParameterError, ModelMismatchError
from nlcs.model import (
    CoordWise,
    CorruptionSpec,
    Linear,
    MeasurementEnsemble,
    MultiBitDither,
    OneBit,
    Sim,
    VarSelect,
    gen_matrix,
)
from nlcs.observe import (
    corrupt,
    modulo_val,
    observe,
    observe_batch,
    sign_val,
    uniform_quantize,
)


# ---------------------------------------------------------------------------
# scalar conventions
# ---------------------------------------------------------------------------

def test_sign_convention():
    assert sign_val(0.0) == 1.0
    assert sign_val(-0.3) == -1.0
    assert sign_val(2.0) == 1.0
    np.testing.assert_array_equal(sign_val(np.array([-1.0, 0.0, 0.5])), [-1, 1, 1])


def test_quantizer_hand_values():
    # ceil(0.25)=1 -> (2-1)*1; ceil(-0.25)=0 -> -1; cell (0,2] has center 1
    assert uniform_quantize(0.5, 1.0) == 1.0
    assert uniform_quantize(-0.5, 1.0) == -1.0
    assert uniform_quantize(2.0, 1.0) == 1.0
    with pytest.raises(InvalidParameterError):
        uniform_quantize(0.5, 0.0)


@settings(max_examples=300, deadline=None)
@given(
    v=st.floats(-1e6, 1e6, allow_nan=False),
    delta=st.sampled_from([0.125, 0.5, 1.0, 2.0, 3.5]),
)
def test_quantizer_cell_bound_and_grid(v, delta):
    q = float(uniform_quantize(v, delta))
    assert abs(q - v) <= delta * (1 + 1e-12) + 1e-9 * abs(v)
    ratio = q / delta
    assert abs(ratio - round(ratio)) < 1e-6
    assert round(ratio) % 2 != 0


def test_modulo_hand_values():
    assert modulo_val(0.0, 2.0) == 0.0
    assert modulo_val(1.5, 1.0) == -0.5           # floor(2.5/2)=1 -> 1.5 - 2
    for v in np.linspace(-0.99, 0.99, 21):
        assert modulo_val(v, 1.0) == v            # floor term vanishes inside (-lam, lam)
    with pytest.raises(InvalidParameterError):
        modulo_val(1.0, -1.0)


@settings(max_examples=200, deadline=None)
@given(
    j=st.integers(-512, 511),
    k=st.sampled_from([1, -1, 7, 10, -10, 10**6, -(10**6)]),
)
def test_modulo_periodicity_exact(j, k):
    # dyadic inputs keep v + 2k*lam exact in binary floating point
    lam = 1.0
    v = j / 512.0
    assert modulo_val(v + 2.0 * k * lam, lam) == modulo_val(v, lam)


@settings(max_examples=200, deadline=None)
@given(v=st.floats(-1e5, 1e5, allow_nan=False), lam=st.sampled_from([0.5, 1.0, 2.0]))
def test_modulo_range(v, lam):
    w = float(modulo_val(v, lam))
    assert -lam <= w < lam


# ---------------------------------------------------------------------------
# observe
# ---------------------------------------------------------------------------

def test_observe_linear_exact():
    ens = MeasurementEnsemble(law="gaussian", p=8)
    a = gen_matrix(ens, 20, seed=0)
    x = np.arange(8.0)
    np.testing.assert_array_equal(observe(Linear(), a, x), a.entries @ x)


def test_observe_one_bit_single_row():
    a = np.array([[1.0, -1.0]])
    assert observe(OneBit(), a, np.array([0.0, 1.0]))[0] == -1.0


def test_observe_dimension_mismatch():
    a = np.ones((3, 4))
    with pytest.raises(Exception):
        observe(Linear(), a, np.ones(5))


def test_observe_deterministic_and_dither_separated():
    model = MultiBitDither(delta=1.0)
    ens = MeasurementEnsemble(law="gaussian", p=4)
    a1 = gen_matrix(ens, 50, seed=1)
    a2 = gen_matrix(ens, 50, seed=2)
    x = np.array([0.3, 0.0, -0.2, 0.1])
    y1 = observe(model, a1, x, seed=11)
    y1_again = observe(model, a1, x, seed=11)
    np.testing.assert_array_equal(y1, y1_again)
    # dither stream depends on the observation seed only, not on the matrix
    b1 = observe_batch(model, a1, x, seed=11)
    b2 = observe_batch(model, a2, x, seed=11)
    np.testing.assert_array_equal(b1.dither, b2.dither)


def test_quantizer_dither_identity_mc():
    # E[q_delta(s + tau)] = s for tau ~ U[-delta, delta]
    rng = np.random.default_rng(0)
    for delta in (0.5, 2.0):
        for s in (-3.3, 0.7):
            tau = rng.uniform(-delta, delta, 200_000)
            resid = uniform_quantize(s + tau, delta).mean() - s
            assert abs(resid) < 5e-3 * max(1.0, abs(s)) * 2


def test_dithered_sign_identity_mc():
    # E[sign(s + tau)] = s/lam for |s| <= lam, tau ~ U[-lam, lam]
    rng = np.random.default_rng(1)
    lam = 1.5
    for s in (-1.5, -0.6, 0.0, 0.9, 1.5):
        tau = rng.uniform(-lam, lam, 200_000)
        resid = sign_val(s + tau).mean() - s / lam
        assert abs(resid) < 1e-2


def test_sim_and_var_select_observe():
    a = np.array([[1.0, 2.0, 3.0], [0.0, -1.0, 1.0]])
    y = observe(Sim(f=np.tanh, gamma=1.0, name="tanh"), a, np.array([1.0, 0.0, 0.0]))
    np.testing.assert_allclose(y, np.tanh(a[:, 0]))
    ys = observe(VarSelect(f_name="linear"), a, np.array([0, 2]))
    np.testing.assert_allclose(ys, (a[:, 0] + a[:, 2]) / np.sqrt(2))


def test_coordwise_growth_bounds():
    # default component function: alpha=1 lower slope, beta2=1.5 upper
    model = CoordWise()
    rng = np.random.default_rng(3)
    v = rng.standard_normal(100_000) * 2.0
    w = v - np.abs(rng.standard_normal(100_000))        # w < v
    fv, fw = model.f(v), model.f(w)
    gaps = fv - fw
    d = v - w
    assert np.all(gaps >= model.alpha * d - 1e-12)
    assert np.all(gaps <= model.beta2 * d + 1e-12)
    pos = np.abs(v)
    fpos = model.f(pos)
    assert np.all(fpos >= model.beta1 * pos - 1e-12)
    assert np.all(fpos <= model.beta2 * pos + 1e-12)


# ---------------------------------------------------------------------------
# corruption
# ---------------------------------------------------------------------------

def _one_bit_setup(m=100, p=16, seed=5):
    ens = MeasurementEnsemble(law="gaussian", p=p)
    a = gen_matrix(ens, m, seed=seed)
    x = np.zeros(p)
    x[:3] = (1.0, -2.0, 0.5)
    y = observe(OneBit(), a, x)
    return a, x, y


def test_corrupt_empty_is_identity():
    a, x, y = _one_bit_setup()
    out, log = corrupt(y, CorruptionSpec(), OneBit(), x, a, seed=0)
    np.testing.assert_array_equal(out, y)
    assert log.flipped.size == 0 and log.outliers.size == 0


def test_corrupt_bitflip_budget_exact():
    a, x, y = _one_bit_setup(m=100)
    spec = CorruptionSpec(bitflip_frac=0.05)
    out, log = corrupt(y, spec, OneBit(), x, a, seed=1)
    diff = out - y
    assert np.sum(diff != 0) == 5                       # Hamming distance floor(beta*m)
    assert np.abs(diff[diff != 0]).tolist() == [2.0] * 5
    assert np.abs(out - y).sum() / 2 == 5               # (1/2)||nu||_1 = flips
    assert log.flipped.size == 5


def test_corrupt_bitflip_requires_binary_model():
    a, x, _ = _one_bit_setup()
    y_lin = observe(Linear(), a, x)
    with pytest.raises(ModelMismatchError):
        corrupt(y_lin, CorruptionSpec(bitflip_frac=0.1), Linear(), x, a, seed=0)


def test_corrupt_l2_budget_exact():
    a, x, _ = _one_bit_setup()
    y = observe(Linear(), a, x)
    spec = CorruptionSpec(l2_budget=0.37)
    out, log = corrupt(y, spec, Linear(), x, a, seed=2)
    realized = np.sqrt(np.mean((out - y) ** 2))
    assert abs(realized - 0.37) < 1e-12
    assert log.l2_mode == "random"


def test_corrupt_aligned_scaling():
    # nu_i = c * <a_i, x>; realized normalized l2 norm -> c * ||x||_2 by isotropy
    p, m = 8, 10_000
    ens = MeasurementEnsemble(law="gaussian", p=p)
    a = gen_matrix(ens, m, seed=9)
    x = np.zeros(p)
    x[0], x[3] = 0.6, -0.8                              # ||x||_2 = 1
    y = observe(Linear(), a, x)
    c = 0.25
    out, log = corrupt(y, CorruptionSpec(l2_budget=c, adversarial_mode="aligned"),
                       Linear(), x, a, seed=3)
    realized = np.sqrt(np.mean((out - y) ** 2))
    assert abs(realized - c * np.linalg.norm(x)) < 0.1 * c
    assert log.l2_mode == "aligned"


def test_corrupt_gross_outliers_exact():
    a, x, _ = _one_bit_setup()
    y = observe(Linear(), a, x)
    spec = CorruptionSpec(gross_outliers=7, outlier_magnitude=50.0)
    out, log = corrupt(y, spec, Linear(), x, a, seed=4)
    changed = np.nonzero(out != y)[0]
    assert changed.size == 7
    np.testing.assert_array_equal(np.sort(changed), log.outliers)
    assert np.all(np.abs((out - y)[changed]) == 50.0)


def test_linear_gauss_zero_sigma_equals_linear():
    from nlcs.model import LinearGaussNoise

    ens = MeasurementEnsemble(law="gaussian", p=5)
    a = gen_matrix(ens, 30, seed=0)
    x = np.arange(5.0)
    np.testing.assert_array_equal(
        observe(LinearGaussNoise(sigma=0.0), a, x, seed=3), observe(Linear(), a, x)
    )
