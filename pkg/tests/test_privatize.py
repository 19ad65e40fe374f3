import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from adjpriv import data as D
from adjpriv import nn
from adjpriv.obfuscator import ObfuscatorArch, ObfuscatorModel, evaluate
from adjpriv.privatize import (PrivacyParams, apply_f, apply_g, nu, obfuscate_batch,
                               obfuscate_dataset, obfuscate_record)


@pytest.fixture(scope="module")
def model():
    return ObfuscatorModel.initialize(ObfuscatorArch.dense(24, hidden=(32,), bottleneck=16), seed=2,
                                      variance=0.3)


@pytest.fixture(scope="module")
def synth():
    return D.synth_generate(D.SynthSpec(n=200, seed=3))


# ---------------------------------------------------------------- nu

def test_nu_mean_and_floor():
    assert nu([1, 2, 3, 2]) == 2.0
    assert nu(np.zeros(5)) == 1e-8
    assert np.allclose(nu(np.array([[1.0, 3.0], [0.0, 0.0]])), [2.0, 1e-8])


def test_nu_nonnegative_on_rest_head(model, synth):
    w_p = model.rest(model.encode(synth.features))
    assert np.all(nu(w_p) > 0)


# ---------------------------------------------------------------- f

def test_f_identity_at_zero_k():
    w = np.random.default_rng(0).random((3, 6))
    out = apply_f(w, PrivacyParams(k=0.0))
    assert out.tobytes() == w.tobytes()
    assert apply_f(w, PrivacyParams(k=5.0, f_enabled=False)).tobytes() == w.tobytes()


def test_f_noise_law():
    w = np.full((100_000, 1), 2.0)  # nu = 2 on every record
    out = apply_f(w, PrivacyParams(k=60.0), rng=np.random.default_rng(11))
    noise = (out - w).ravel()
    assert noise.std() == pytest.approx(math.sqrt(120), rel=0.02)
    se = noise.std() / math.sqrt(noise.size)
    assert abs(noise.mean()) < 3 * se


@pytest.mark.parametrize("k, level", [(5.0, 0.5), (20.0, 3.0), (200.0, 1.25)])
def test_f_variance_matches_k_nu(k, level):
    w = np.full((100_000, 3), level)
    noise = apply_f(w, PrivacyParams(k=k), rng=np.random.default_rng(int(k))) - w
    assert noise.var() == pytest.approx(k * level, rel=0.02)


def test_f_per_record_streams():
    w = np.random.default_rng(0).random((6, 4))
    p = PrivacyParams(k=10.0, noise_seed=4)
    whole = apply_f(w, p, indices=np.arange(6))
    parts = np.vstack([apply_f(w[:2], p, indices=[0, 1]), apply_f(w[2:], p, indices=[2, 3, 4, 5])])
    assert whole.tobytes() == parts.tobytes()
    other = apply_f(w, PrivacyParams(k=10.0, noise_seed=5), indices=np.arange(6))
    assert not np.array_equal(whole, other)


# ---------------------------------------------------------------- g

def test_g_examples():
    p = PrivacyParams(lam=-3000.0)
    assert apply_g(np.array([-0.1, -2.3]), 0, p).tolist() == [0.0, -3000.0]
    assert apply_g(np.array([-5.0, -0.01]), 1, p).tolist() == [-3000.0, 0.0]
    w = np.array([-0.1, -2.3])
    assert apply_g(w, 1, PrivacyParams(g_enabled=False)).tobytes() == w.tobytes()


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-50, 0), min_size=2, max_size=2), st.integers(0, 1), st.floats(-1e4, 0))
def test_g_image(w, y, lam):
    out = apply_g(np.array(w), y, PrivacyParams(lam=lam))
    assert sorted(out.tolist()) == sorted([0.0, lam])
    assert out[y] == 0.0


def test_g_rejects_bad_class():
    with pytest.raises(ValueError):
        apply_g(np.zeros((2, 2)), [0, 2], PrivacyParams())


def test_params_validated():
    with pytest.raises(ValueError):
        PrivacyParams(k=-1)
    with pytest.raises(ValueError):
        PrivacyParams(lam=1)


# ---------------------------------------------------------------- records and datasets

def test_record_identity_settings_reproduce_reconstruction(model, synth):
    x = synth.features[0]
    p = PrivacyParams(k=0.0, g_enabled=False)
    out = obfuscate_record(model, x, int(synth.y_nonprivate[0]), p)
    assert out.tobytes() == model.reconstruct(x[None, :])[0].tobytes()
    assert out.shape == x.shape


def test_record_deterministic_and_matches_dataset(model, synth):
    p = PrivacyParams(k=40.0, noise_seed=9)
    a = obfuscate_record(model, synth.features[7], int(synth.y_nonprivate[7]), p, index=7)
    b = obfuscate_record(model, synth.features[7], int(synth.y_nonprivate[7]), p, index=7)
    full = obfuscate_dataset(model, synth, p, chunk=32)
    assert a.tobytes() == b.tobytes()
    # batched matmuls may round differently from a single row; noise is identical
    np.testing.assert_allclose(a, full.features[7], rtol=0, atol=1e-12)


def test_dataset_shape_and_labels(model, synth):
    out = obfuscate_dataset(model, synth, PrivacyParams(k=5.0))
    assert out.features.shape == synth.features.shape
    assert np.array_equal(out.y_private, synth.y_private)
    assert np.array_equal(out.y_nonprivate, synth.y_nonprivate)


def test_dataset_chunking_irrelevant(model, synth):
    p = PrivacyParams(k=15.0, noise_seed=2)
    a = obfuscate_dataset(model, synth, p, chunk=7)
    b = obfuscate_dataset(model, synth, p, chunk=4096)
    np.testing.assert_allclose(a.features, b.features, rtol=0, atol=1e-12)
    c = obfuscate_dataset(model, synth, p, chunk=7)
    assert a.features.tobytes() == c.features.tobytes()


def test_identity_mse_equals_reconstruction_loss(model, synth):
    out = obfuscate_dataset(model, synth, PrivacyParams(k=0.0, g_enabled=False))
    l_ae, _, _ = evaluate(model, synth)
    assert np.mean((out.features - synth.features) ** 2) == pytest.approx(l_ae, rel=1e-12)


@pytest.mark.parametrize("k", [0.0, 1e3, 1e8])
def test_output_in_unit_box(model, synth, k):
    out = obfuscate_dataset(model, synth, PrivacyParams(k=k, lam=-3000.0))
    assert out.features.min() >= 0.0 and out.features.max() <= 1.0


def test_batch_with_explicit_rng(model, synth):
    p = PrivacyParams(k=3.0)
    a = obfuscate_batch(model, synth.features[:5], synth.y_nonprivate[:5], p, rng=np.random.default_rng(1))
    b = obfuscate_batch(model, synth.features[:5], synth.y_nonprivate[:5], p, rng=np.random.default_rng(1))
    assert a.tobytes() == b.tobytes()
