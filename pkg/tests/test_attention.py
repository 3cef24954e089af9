"""Attention block: invariants, token construction, model forward and gradients."""

import math

import numpy as np
import pytest

from qasa import attention, vqc


def test_attention_t1_returns_v():
    q = np.array([[0.3, -0.2]])
    k = np.array([[0.9, 0.1]])
    v = np.array([[0.5, -0.7]])
    np.testing.assert_array_equal(attention.attention(q, k, v), v)


def test_attention_identical_keys_averages_v():
    rng = np.random.default_rng(0)
    q = rng.normal(size=(5, 3))
    k = np.tile(rng.normal(size=(1, 3)), (5, 1))
    v = rng.normal(size=(5, 3))
    out = attention.attention(q, k, v)
    want = np.tile(v.mean(axis=0), (5, 1))
    np.testing.assert_allclose(out, want, atol=1e-12)


def test_attention_matches_triple_loop_oracle():
    rng = np.random.default_rng(1)
    q, k, v = rng.normal(size=(3, 4, 3))
    got = attention.attention(q, k, v)
    d = q.shape[1]
    want = np.zeros_like(got)
    for i in range(4):
        scores = np.array([sum(q[i, a] * k[j, a] for a in range(d)) for j in range(4)])
        scores = scores / math.sqrt(d)
        w = np.exp(scores - scores.max())
        w = w / w.sum()
        for j in range(4):
            want[i] += w[j] * v[j]
    np.testing.assert_allclose(got, want, atol=1e-12)


def test_attention_weight_rows_normalized():
    rng = np.random.default_rng(2)
    for _ in range(50):
        t, n = int(rng.integers(1, 9)), int(rng.integers(1, 7))
        w = attention.attention_weights(rng.uniform(-1, 1, (t, n)), rng.uniform(-1, 1, (t, n)))
        assert np.all(w >= 0)
        np.testing.assert_allclose(w.sum(axis=1), 1.0, atol=1e-12)


def test_attention_joint_kv_permutation_equivariance():
    rng = np.random.default_rng(3)
    q = rng.normal(size=(6, 4))
    k = rng.normal(size=(6, 4))
    v = rng.normal(size=(6, 4))
    perm = rng.permutation(6)
    base = attention.attention(q, k, v)
    permuted = attention.attention(q, k[perm], v[perm])
    np.testing.assert_allclose(base, permuted, atol=1e-13)


def test_softmax_shift_invariance():
    rng = np.random.default_rng(4)
    scores = rng.normal(size=(4, 4))
    shifted = scores.copy()
    shifted[2] += 123.456
    a = attention.softmax_rows(scores)
    b = attention.softmax_rows(shifted)
    np.testing.assert_allclose(a[2], b[2], atol=1e-15)
    np.testing.assert_array_equal(a[[0, 1, 3]], b[[0, 1, 3]])


def test_make_tokens_sequence_shapes_and_values():
    closes = np.array([1.0, 2.0, 4.0])
    batch = attention.make_tokens_sequence(closes, window=2)
    assert batch.tokens.shape == (1, 2)
    np.testing.assert_allclose(batch.tokens[0], [math.log(2)] * 2, atol=1e-15)

    prices = np.exp(np.cumsum(np.random.default_rng(5).normal(0, 0.01, 30)))
    batch = attention.make_tokens_sequence(prices, window=8)
    assert batch.tokens.shape == (30 - 8, 8)

    flat = attention.make_tokens_sequence(np.full(10, 7.0), window=4)
    np.testing.assert_array_equal(flat.tokens, np.zeros((6, 4)))


def test_qkv_shapes_bounds_and_determinism():
    rng = np.random.default_rng(6)
    model = attention.new_model("sequence", window=4, seed=0)
    tokens = attention.TokenBatch(rng.normal(size=(5, 4)), origin="price-window")
    q, k, v = attention.qkv(tokens, model)
    assert q.shape == k.shape == v.shape == (5, model.n_qubits)
    for mat in (q, k, v):
        assert np.all(mat >= -1.0) and np.all(mat <= 1.0)
    # identical tokens give identical rows
    same = attention.TokenBatch(np.tile(tokens.tokens[:1], (3, 1)), origin="price-window")
    q2, _, _ = attention.qkv(same, model)
    assert np.array_equal(q2[0], q2[1]) and np.array_equal(q2[1], q2[2])


def test_forward_zero_head_gives_half():
    model = attention.new_model("sequence", window=4, seed=1)
    model = model.with_params(
        model.vqc_q.thetas, model.vqc_k.thetas, model.vqc_v.thetas,
        np.zeros(model.n_qubits), 0.0,
    )
    rng = np.random.default_rng(7)
    assert attention.forward(rng.normal(size=(4, 4)), model) == 0.5


def test_forward_range_and_determinism():
    rng = np.random.default_rng(8)
    model = attention.new_model("sequence", window=8, seed=2)
    tokens = rng.normal(size=(8, 8))
    p1 = attention.forward(tokens, model)
    p2 = attention.forward(tokens, model)
    assert p1 == p2
    assert 0.0 < p1 < 1.0


def test_forward_hybrid_matches_generic_forward():
    rng = np.random.default_rng(9)
    model = attention.new_model("hybrid", window=4, seed=3)
    angles = rng.uniform(0, 2 * math.pi, (4, 8))
    direct = attention.forward_hybrid(angles, model)
    assert direct == attention.forward(angles, model)
    assert 0.0 < direct < 1.0
    single = attention.forward_hybrid(angles[:1], model)
    assert 0.0 < single < 1.0


def test_forward_hybrid_rejects_sequence_model():
    model = attention.new_model("sequence", window=4, seed=0)
    with pytest.raises(ValueError, match="hybrid"):
        attention.forward_hybrid(np.zeros((2, 8)), model)


def test_build_sequence_samples_alignment():
    rng = np.random.default_rng(10)
    prices = np.exp(np.cumsum(rng.normal(0.001, 0.01, 60)))
    labels = np.full(60, np.nan)
    labels[19:] = rng.integers(0, 2, 41)
    samples = attention.build_sequence_samples(prices, labels, window=8)
    assert samples.bars[0] == 19  # max(2W-1, label warm-up)
    assert samples.bars[-1] == 59
    assert samples.states.shape == (len(samples), 8, 8)
    np.testing.assert_array_equal(samples.labels, labels[samples.bars])


def test_full_model_gradient_matches_finite_differences(kernel_backend):
    rng = np.random.default_rng(11)
    model = attention.new_model("sequence", window=4, n_layers=2, seed=4)
    n = model.n_qubits
    states = vqc.encode_batch(rng.normal(size=(8, 4)), model.vqc_q).reshape(2, 4, 4)
    labels = np.array([1.0, 0.0])
    pos_weight = 1.5
    loss, grads = attention.batch_loss_and_grads(states, labels, model, pos_weight)

    def loss_at(m):
        p = np.clip(attention.predict_batch(states, m), 1e-7, 1 - 1e-7)
        return float(np.mean(-(pos_weight * labels * np.log(p)
                               + (1 - labels) * np.log(1 - p))))

    assert abs(loss - loss_at(model)) < 1e-12
    h = 1e-5
    flat = {
        "thetas_q": np.asarray(model.vqc_q.thetas),
        "thetas_k": np.asarray(model.vqc_k.thetas),
        "thetas_v": np.asarray(model.vqc_v.thetas),
    }
    for name, base in flat.items():
        for idx in np.ndindex(base.shape):
            up = {k: v.copy() for k, v in flat.items()}
            up[name][idx] += h
            down = {k: v.copy() for k, v in flat.items()}
            down[name][idx] -= h
            m_up = model.with_params(up["thetas_q"], up["thetas_k"], up["thetas_v"],
                                     model.head_w, model.head_b)
            m_dn = model.with_params(down["thetas_q"], down["thetas_k"], down["thetas_v"],
                                     model.head_w, model.head_b)
            fd = (loss_at(m_up) - loss_at(m_dn)) / (2 * h)
            assert abs(fd - grads[name][idx]) < 1e-6
    for i in range(n):
        w_up = np.asarray(model.head_w).copy()
        w_up[i] += h
        w_dn = np.asarray(model.head_w).copy()
        w_dn[i] -= h
        fd = (
            loss_at(model.with_params(flat["thetas_q"], flat["thetas_k"], flat["thetas_v"], w_up, model.head_b))
            - loss_at(model.with_params(flat["thetas_q"], flat["thetas_k"], flat["thetas_v"], w_dn, model.head_b))
        ) / (2 * h)
        assert abs(fd - grads["head_w"][i]) < 1e-6


def test_model_checkpoint_round_trip(tmp_path):
    model = attention.new_model("sequence", window=8, seed=5)
    path = tmp_path / "checkpoint.json"
    model.save(path)
    loaded = attention.QasaModel.load(path)
    assert loaded.to_dict() == model.to_dict()
    rng = np.random.default_rng(12)
    tokens = rng.normal(size=(8, 8))
    assert attention.forward(tokens, loaded) == attention.forward(tokens, model)


def test_predict_batch_sampled_close_to_exact():
    rng = np.random.default_rng(13)
    model = attention.new_model("sequence", window=4, seed=6)
    states = vqc.encode_batch(rng.normal(size=(8, 4)), model.vqc_q).reshape(2, 4, 4)
    exact = attention.predict_batch(states, model)
    sampled = attention.predict_batch_sampled(states, model, shots=40_000,
                                              rng=np.random.default_rng(0))
    np.testing.assert_allclose(sampled, exact, atol=0.05)
