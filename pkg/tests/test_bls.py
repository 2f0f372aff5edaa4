"""Broad-learning head: tansig, enhancement nodes, ridge solver, flat baseline."""

from decimal import Decimal, getcontext

import numpy as np
import pytest

from dwnet import (
    BlsConfig,
    BlsHead,
    FlatBlsConfig,
    bls_fit,
    bls_predict,
    bls_scores,
    enhance,
    flat_bls_fit,
    flat_bls_predict,
    flatten_clips,
    gen_enhancement_params,
    load_flat,
    load_head,
    one_hot,
    ridge_fit,
    save_flat,
    save_head,
    tansig,
)


def svd_ridge(a, y, lam):
    """Independent closed form: W = V diag(s/(s^2+lam)) U' Y."""
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    return vt.T @ np.diag(s / (s ** 2 + lam)) @ (u.T @ y)


def blob_data(rng, n_per=30, d=4):
    centers = np.array([[2.0] * d, [-2.0] * d, [2.0, -2.0] * (d // 2)])
    z = np.concatenate([c + 0.3 * rng.standard_normal((n_per, d)) for c in centers])
    labels = np.repeat(np.arange(3), n_per)
    return z, labels


# ---------------------------------------------------------------------------
# tansig
# ---------------------------------------------------------------------------

def test_tansig_value_against_high_precision():
    # tanh(1) = (e^2 - 1) / (e^2 + 1) computed with 50-digit arithmetic
    getcontext().prec = 50
    e2 = Decimal(2).exp()
    want = float((e2 - 1) / (e2 + 1))
    assert tansig(np.array(1.0)) == want
    assert want == 0.7615941559557649


def test_tansig_equals_logistic_identity(rng):
    x = rng.standard_normal(1000) * 4
    alt = 2.0 / (1.0 + np.exp(-2.0 * x)) - 1.0
    assert np.abs(tansig(x) - alt).max() <= 1e-15


def test_tansig_shape_symmetry_range(rng):
    x = rng.standard_normal((3, 4))
    y = tansig(x)
    assert y.shape == x.shape
    assert np.abs(y + tansig(-x)).max() <= 1e-16
    assert tansig(np.array(0.0)) == 0.0
    assert np.all(np.abs(y) < 1.0)
    assert tansig(np.array(50.0)) == 1.0  # saturates in float64


# ---------------------------------------------------------------------------
# Enhancement nodes
# ---------------------------------------------------------------------------

def test_enhancement_param_shapes_and_bounds():
    config = BlsConfig(m=64, scale=0.8, seed=0)
    w, b = gen_enhancement_params(10, config, np.random.default_rng(0))
    assert w.shape == (10, 64)
    assert b.shape == (64,)
    assert np.abs(w).max() <= 0.8
    assert np.abs(b).max() <= 1.0


def test_enhancement_params_uniform_statistics():
    config = BlsConfig(m=500, scale=0.8, seed=0)
    w, _ = gen_enhancement_params(400, config, np.random.default_rng(1))
    draws = w.ravel()  # 200000 samples of 0.8 * U(-1, 1)
    assert draws.size >= 1e5
    assert abs(draws.mean()) < 0.01
    assert abs(draws.std() - 0.8 / np.sqrt(3)) < 0.01


def test_enhancement_deterministic():
    config = BlsConfig(m=16, seed=4)
    w1, b1 = gen_enhancement_params(5, config, np.random.default_rng(4))
    w2, b2 = gen_enhancement_params(5, config, np.random.default_rng(4))
    assert np.array_equal(w1, w2) and np.array_equal(b1, b2)


def test_enhance_matches_per_sample_loop(rng):
    z = rng.standard_normal((7, 5))
    w, b = gen_enhancement_params(5, BlsConfig(m=9), rng)
    h = enhance(z, w, b)
    assert h.shape == (7, 9)
    for i in range(7):
        want = np.tanh(np.array([z[i] @ w[:, j] + b[j] for j in range(9)]))
        assert np.abs(h[i] - want).max() <= 1e-12


def test_zero_scale_rejected_but_zero_weights_ignore_input(rng):
    with pytest.raises(ValueError, match="scale"):
        BlsConfig(m=6, scale=0.0)
    # with all-zero weights the nodes depend on the bias alone
    b = rng.uniform(-1, 1, size=6)
    h = enhance(rng.standard_normal((4, 5)), np.zeros((5, 6)), b)
    assert np.allclose(h, np.tanh(b)[None, :])


# ---------------------------------------------------------------------------
# One-hot
# ---------------------------------------------------------------------------

def test_one_hot_zero_one_coding():
    y = one_hot(np.array([0, 2, 1, 2]), 3)
    assert y.shape == (4, 3)
    assert set(np.unique(y)) == {0.0, 1.0}
    assert np.array_equal(y.sum(axis=1), np.ones(4))
    assert np.array_equal(y.argmax(axis=1), [0, 2, 1, 2])
    with pytest.raises(ValueError):
        one_hot(np.array([0, 3]), 3)


# ---------------------------------------------------------------------------
# Ridge solver
# ---------------------------------------------------------------------------

def test_ridge_identity_design():
    y = np.array([[1.0, 0.0], [0.0, 2.0], [3.0, 3.0]])
    assert np.abs(ridge_fit(np.eye(3), y, 0.0) - y).max() <= 1e-12
    lam = 0.5
    assert np.abs(ridge_fit(np.eye(3), y, lam) - y / (1 + lam)).max() <= 1e-12


def test_ridge_matches_svd_oracle_both_regimes(rng):
    for n, d in [(40, 12), (12, 40), (25, 25)]:
        a = rng.standard_normal((n, d))
        y = rng.standard_normal((n, 3))
        for lam in (1e-8, 1e-2, 1.0):
            w = ridge_fit(a, y, lam)
            assert w.shape == (d, 3)
            assert np.abs(w - svd_ridge(a, y, lam)).max() <= 1e-8


def test_ridge_lambda_zero_underdetermined_rejected(rng):
    a = rng.standard_normal((5, 9))
    y = rng.standard_normal((5, 2))
    with pytest.raises(np.linalg.LinAlgError, match="lambda"):
        ridge_fit(a, y, 0.0)


def test_ridge_singular_square_rejected():
    a = np.zeros((4, 4))
    y = np.ones((4, 2))
    with pytest.raises(np.linalg.LinAlgError):
        ridge_fit(a, y, 0.0)


def test_ridge_norm_non_increasing_in_lambda(rng):
    a = rng.standard_normal((30, 10))
    y = rng.standard_normal((30, 4))
    norms = [np.linalg.norm(ridge_fit(a, y, lam))
             for lam in (1e-8, 1e-4, 1e-2, 1.0, 1e2)]
    assert all(b <= a + 1e-12 for a, b in zip(norms, norms[1:]))


def test_ridge_input_validation(rng):
    with pytest.raises(ValueError):
        ridge_fit(rng.standard_normal((4, 3)), rng.standard_normal((5, 2)), 0.1)
    with pytest.raises(ValueError):
        ridge_fit(rng.standard_normal((4, 3)), rng.standard_normal((4, 2)), -1.0)


# ---------------------------------------------------------------------------
# BLS head
# ---------------------------------------------------------------------------

def test_bls_fit_separable_blobs(rng):
    z, labels = blob_data(rng)
    head = bls_fit(z, labels, BlsConfig(m=50, seed=0))
    scores, preds = bls_predict(head, z)
    assert scores.shape == (90, 3)
    assert np.array_equal(preds, labels)
    assert head.feature_dim == 4 and head.num_classes == 3


def test_bls_interpolation_regime(rng):
    # m >> N: the one-hot targets are fit almost exactly
    z = rng.standard_normal((20, 6))
    labels = np.arange(20) % 4
    head = bls_fit(z, labels, BlsConfig(m=80, ridge_lambda=1e-8, seed=1))
    scores = bls_scores(head, z)
    assert np.abs(scores - one_hot(labels, 4)).max() <= 1e-5
    _, preds = bls_predict(head, z)
    assert np.array_equal(preds, labels)


def test_bls_fit_deterministic(rng):
    z, labels = blob_data(rng)
    h1 = bls_fit(z, labels, BlsConfig(m=30, seed=2))
    h2 = bls_fit(z, labels, BlsConfig(m=30, seed=2))
    assert np.array_equal(h1.out_weights, h2.out_weights)
    assert np.array_equal(h1.enh_weights, h2.enh_weights)


def test_bls_fit_seeded_flag(rng):
    z, labels = blob_data(rng)
    assert bls_fit(z, labels, BlsConfig(m=8, seed=0)).seeded is True
    external = bls_fit(z, labels, BlsConfig(m=8, seed=0),
                       rng=np.random.default_rng(0))
    assert external.seeded is False


def test_bls_fit_rejects_single_class(rng):
    z = rng.standard_normal((10, 4))
    with pytest.raises(ValueError, match="class"):
        bls_fit(z, np.zeros(10, dtype=int), BlsConfig(m=8))


def test_bls_num_classes_override(rng):
    z, labels = blob_data(rng)
    head = bls_fit(z, labels, BlsConfig(m=10), num_classes=5)
    assert head.num_classes == 5
    assert bls_scores(head, z).shape == (90, 5)


def test_bls_argmax_tie_takes_lowest_index(rng):
    head = bls_fit(*blob_data(rng), BlsConfig(m=10, seed=0))
    head.out_weights[:] = 0.0  # all scores identical
    _, preds = bls_predict(head, rng.standard_normal((6, 4)))
    assert np.array_equal(preds, np.zeros(6, dtype=preds.dtype))


def test_bls_scores_dim_check(rng):
    head = bls_fit(*blob_data(rng), BlsConfig(m=10, seed=0))
    with pytest.raises(ValueError):
        bls_scores(head, rng.standard_normal((3, 7)))


# ---------------------------------------------------------------------------
# Flat baseline
# ---------------------------------------------------------------------------

def test_flatten_clips_sbu_width(rng):
    batch = rng.standard_normal((4, 2, 2, 3, 16, 15))
    flat = flatten_clips(batch)
    assert flat.shape == (4, 2880)
    # per person: position block then motion block, 720 values each
    for i in range(4):
        assert np.array_equal(flat[i, :720], batch[i, 0, 0].ravel())
        assert np.array_equal(flat[i, 720:1440], batch[i, 1, 0].ravel())
        assert np.array_equal(flat[i, 1440:2160], batch[i, 0, 1].ravel())
        assert np.array_equal(flat[i, 2160:], batch[i, 1, 1].ravel())


def test_flat_bls_fit_predict(rng):
    # class-dependent mean offsets, trivially separable
    labels = np.repeat(np.arange(3), 8)
    batch = rng.standard_normal((24, 2, 1, 3, 4, 5)) * 0.05
    batch += labels[:, None, None, None, None, None] * 1.0
    config = FlatBlsConfig(n_feature_nodes=20, m=60, seed=0)
    model = flat_bls_fit(batch, labels, config)
    scores, preds = flat_bls_predict(model, batch)
    assert scores.shape == (24, 3)
    assert np.array_equal(preds, labels)
    assert model.feature_weights.shape == (2 * 1 * 3 * 4 * 5, 20)


def test_flat_bls_deterministic(rng):
    labels = np.repeat(np.arange(2), 5)
    batch = rng.standard_normal((10, 2, 1, 3, 4, 4))
    config = FlatBlsConfig(n_feature_nodes=8, m=12, seed=3)
    m1 = flat_bls_fit(batch, labels, config)
    m2 = flat_bls_fit(batch, labels, config)
    assert np.array_equal(m1.head.out_weights, m2.head.out_weights)


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def test_head_round_trip_stored(tmp_path, rng):
    z, labels = blob_data(rng)
    head = bls_fit(z, labels, BlsConfig(m=20, seed=5))
    save_head(head, tmp_path / "h")
    back = load_head(tmp_path / "h")
    assert np.array_equal(back.out_weights, head.out_weights)
    assert np.array_equal(back.enh_weights, head.enh_weights)
    assert np.array_equal(back.enh_bias, head.enh_bias)
    assert back.config == head.config
    assert np.array_equal(bls_scores(back, z), bls_scores(head, z))


def test_head_round_trip_seed_only(tmp_path, rng):
    z, labels = blob_data(rng)
    head = bls_fit(z, labels, BlsConfig(m=20, seed=6))
    save_head(head, tmp_path / "h", store_enhancement=False)
    back = load_head(tmp_path / "h")
    assert np.array_equal(back.enh_weights, head.enh_weights)
    assert np.array_equal(bls_scores(back, z), bls_scores(head, z))


def test_seed_only_save_requires_seeded_head(tmp_path, rng):
    z, labels = blob_data(rng)
    head = bls_fit(z, labels, BlsConfig(m=20, seed=6), rng=np.random.default_rng(9))
    with pytest.raises(ValueError):
        save_head(head, tmp_path / "h", store_enhancement=False)
    save_head(head, tmp_path / "h2")  # storing tensors always works
    back = load_head(tmp_path / "h2")
    assert np.array_equal(back.enh_weights, head.enh_weights)


def test_flat_round_trip(tmp_path, rng):
    labels = np.repeat(np.arange(2), 6)
    batch = rng.standard_normal((12, 2, 1, 3, 4, 4))
    model = flat_bls_fit(batch, labels, FlatBlsConfig(n_feature_nodes=6, m=10, seed=0))
    save_flat(model, tmp_path / "f")
    back = load_flat(tmp_path / "f")
    assert np.array_equal(flat_bls_predict(back, batch)[0],
                          flat_bls_predict(model, batch)[0])
    assert back.config == model.config
