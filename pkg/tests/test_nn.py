import math

import numpy as np
import pytest

import oracles
from inflectlm import nn
from inflectlm.gradcheck import finite_difference_check


def rand_lstm(rng, D, H, scale=0.5):
    return nn.LstmWeights(rng.normal(0, scale, (4 * H, D)), rng.normal(0, scale, (4 * H, H)),
                          rng.normal(0, scale, 4 * H))


class TestEmbedding:
    def test_lookup(self):
        assert nn.embedding_forward(np.array([0]), np.eye(2)).tolist() == [[1.0, 0.0]]

    def test_repeated_ids(self):
        out = nn.embedding_forward(np.array([1, 1]), np.arange(6.0).reshape(3, 2))
        assert np.array_equal(out[0], out[1])

    def test_out_of_range(self):
        with pytest.raises(IndexError):
            nn.embedding_forward(np.array([3]), np.eye(3))

    def test_gradient_counts_occurrences(self):
        ids = np.array([2, 0, 2, 2])
        E = np.random.default_rng(0).normal(size=(4, 3))
        analytic = nn.embedding_backward(ids, np.ones((4, 3)), 4)
        loss = lambda flat: nn.embedding_forward(ids, flat.reshape(4, 3)).sum()
        assert finite_difference_check(loss, E.ravel(), analytic.ravel()) < 1e-9
        assert analytic[2].tolist() == [3.0, 3.0, 3.0]
        assert analytic[1].tolist() == [0.0, 0.0, 0.0]


class TestLstmCell:
    def test_all_zero(self):
        w = nn.LstmWeights(np.zeros((8, 3)), np.zeros((8, 2)), np.zeros(8))
        h, c = nn.lstm_cell(np.zeros(3), np.zeros(2), np.zeros(2), w)
        assert h.tolist() == [0.0, 0.0] and c.tolist() == [0.0, 0.0]

    def test_scalar_hand_computation(self):
        w = nn.LstmWeights(np.zeros((4, 1)), np.zeros((4, 1)), np.zeros(4))
        h, c = nn.lstm_cell(np.zeros(1), np.zeros(1), np.ones(1), w)
        assert c[0] == pytest.approx(0.5, abs=1e-15)
        assert h[0] == pytest.approx(0.5 * math.tanh(0.5), abs=1e-15)
        assert h[0] == pytest.approx(0.23106, abs=1e-5)

    def test_matches_scalar_oracle(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            D, H = rng.integers(1, 6, size=2)
            w = rand_lstm(rng, D, H)
            x, h0, c0 = rng.normal(size=D), rng.normal(size=H), rng.normal(size=H)
            h, c = nn.lstm_cell(x, h0, c0, w)
            h_ref, c_ref = oracles.lstm_cell(x.tolist(), h0.tolist(), c0.tolist(),
                                             w.W.tolist(), w.U.tolist(), w.b.tolist())
            np.testing.assert_allclose(h, h_ref, rtol=0, atol=1e-12)
            np.testing.assert_allclose(c, c_ref, rtol=0, atol=1e-12)

    def test_shape_mismatch(self):
        w = nn.LstmWeights(np.zeros((8, 3)), np.zeros((8, 2)), np.zeros(8))
        with pytest.raises(ValueError):
            nn.lstm_cell(np.zeros(4), np.zeros(2), np.zeros(2), w)

    def test_inconsistent_weights(self):
        with pytest.raises(ValueError):
            nn.LstmWeights(np.zeros((8, 3)), np.zeros((8, 3)), np.zeros(8))


class TestBiLstm:
    def test_single_step(self):
        rng = np.random.default_rng(2)
        fwd, bwd = rand_lstm(rng, 3, 2), rand_lstm(rng, 3, 2)
        x = rng.normal(size=(1, 3))
        out = nn.bilstm_forward(x, fwd, bwd, np.array([True]))
        zeros = np.zeros(2)
        expected = np.concatenate([nn.lstm_cell(x[0], zeros, zeros, fwd)[0],
                                   nn.lstm_cell(x[0], zeros, zeros, bwd)[0]])
        np.testing.assert_allclose(out[0], expected, atol=1e-14)

    def test_all_masked_is_zero(self):
        rng = np.random.default_rng(3)
        out = nn.bilstm_forward(rng.normal(size=(5, 3)), rand_lstm(rng, 3, 2), rand_lstm(rng, 3, 2),
                                np.zeros(5, dtype=bool))
        assert not out.any()

    def _unrolled(self, X, w):
        h, c = np.zeros(w.hidden_size), np.zeros(w.hidden_size)
        rows = []
        for x in X:
            h, c = nn.lstm_cell(x, h, c, w)
            rows.append(h)
        return np.array(rows)

    def test_backward_half_is_reversed_recurrence(self):
        rng = np.random.default_rng(4)
        X = rng.normal(size=(7, 3))
        fwd, bwd = rand_lstm(rng, 3, 4), rand_lstm(rng, 3, 4)
        out = nn.bilstm_forward(X, fwd, bwd, np.ones(7, dtype=bool))
        np.testing.assert_allclose(out[:, :4], self._unrolled(X, fwd), atol=1e-13)
        np.testing.assert_allclose(out[:, 4:], self._unrolled(X[::-1], bwd)[::-1], atol=1e-13)

    def test_left_padding_equals_unpadded(self):
        rng = np.random.default_rng(5)
        X = rng.normal(size=(4, 3))
        fwd, bwd = rand_lstm(rng, 3, 2), rand_lstm(rng, 3, 2)
        padded = np.vstack([rng.normal(size=(3, 3)), X])
        mask = np.array([False] * 3 + [True] * 4)
        out_p = nn.bilstm_forward(padded, fwd, bwd, mask)
        out_u = nn.bilstm_forward(X, fwd, bwd, np.ones(4, dtype=bool))
        assert not out_p[:3].any()
        np.testing.assert_allclose(out_p[3:], out_u, atol=1e-14)

    @pytest.mark.parametrize("reverse", [False, True])
    def test_layer_gradients(self, reverse):
        rng = np.random.default_rng(6)
        B, T, D, H = 3, 5, 3, 2
        X = rng.normal(size=(B, T, D))
        w = rand_lstm(rng, D, H)
        mask = np.ones((B, T), dtype=bool)
        mask[0, :2] = False
        mask[1, :4] = False
        G = rng.normal(size=(B, T, H))  # loss = sum(G * out)
        out, cache = nn.lstm_layer_forward(X, w, mask, reverse)
        dX, gw = nn.lstm_layer_backward(G, cache)
        sizes = [X.size, w.W.size, w.U.size, w.b.size]

        def unpack(flat):
            parts = np.split(flat, np.cumsum(sizes)[:-1])
            return (parts[0].reshape(X.shape), nn.LstmWeights(parts[1].reshape(w.W.shape),
                    parts[2].reshape(w.U.shape), parts[3]))

        def loss(flat):
            Xp, wp = unpack(flat)
            return float(np.sum(G * nn.lstm_layer_forward(Xp, wp, mask, reverse)[0]))

        theta = np.concatenate([X.ravel(), w.W.ravel(), w.U.ravel(), w.b.ravel()])
        grad = np.concatenate([dX.ravel(), gw.W.ravel(), gw.U.ravel(), gw.b.ravel()])
        assert finite_difference_check(loss, theta, grad) < 1e-6


class TestAttention:
    def test_single_step_identity(self):
        F = np.array([[0.3, -1.2, 4.0]])
        out = nn.attention_weighted_average(F, nn.AttentionWeights(np.array([1.0, 2.0, 3.0]), np.array(0.0)))
        np.testing.assert_array_equal(out, F[0])

    def test_zero_projection_is_mean(self):
        F = np.arange(12.0).reshape(4, 3)
        mask = np.array([True, False, True, True])
        out = nn.attention_weighted_average(F, nn.AttentionWeights(np.zeros(3), np.array(0.0)), mask)
        np.testing.assert_allclose(out, F[mask].mean(axis=0), atol=1e-14)

    def test_two_step_hand_computation(self):
        F = np.array([[1.0, 0.0], [0.0, 1.0]])
        aw = nn.AttentionWeights(np.array([1.0, 0.0]), np.array(0.0))
        alpha = nn.attention_weights(F, aw)
        e = math.e
        np.testing.assert_allclose(alpha, [e / (e + 1), 1 / (e + 1)], atol=1e-15)
        np.testing.assert_allclose(nn.attention_weighted_average(F, aw), [0.73106, 0.26894], atol=1e-5)

    def test_all_masked_rejected(self):
        with pytest.raises(ValueError):
            nn.attention_weighted_average(np.ones((2, 2)), nn.AttentionWeights(np.ones(2), np.array(0.0)),
                                          np.zeros(2, dtype=bool))

    def test_matches_scalar_oracle(self):
        rng = np.random.default_rng(7)
        for _ in range(100):
            T, D = rng.integers(1, 8), rng.integers(1, 6)
            F = rng.normal(size=(T, D))
            aw = nn.AttentionWeights(rng.normal(size=D), np.array(rng.normal()))
            mask = rng.random(T) < 0.7
            mask[rng.integers(T)] = True
            ref, ref_alpha = oracles.attention(F.tolist(), aw.w.tolist(), float(aw.b), mask.tolist())
            np.testing.assert_allclose(nn.attention_weighted_average(F, aw, mask), ref, rtol=0, atol=1e-12)
            np.testing.assert_allclose(nn.attention_weights(F, aw, mask), ref_alpha, rtol=0, atol=1e-12)

    def test_gradients(self):
        rng = np.random.default_rng(8)
        B, T, D = 2, 4, 3
        F = rng.normal(size=(B, T, D))
        w = rng.normal(size=D)
        mask = np.array([[False, True, True, True], [True, True, True, True]])
        G = rng.normal(size=(B, D))
        _, cache = nn.attention_layer_forward(F, nn.AttentionWeights(w, np.array(0.0)), mask)
        dF, g = nn.attention_layer_backward(G, cache)

        def loss(flat):
            out, _ = nn.attention_layer_forward(flat[:F.size].reshape(F.shape),
                                                nn.AttentionWeights(flat[F.size:], np.array(0.0)), mask)
            return float(np.sum(G * out))

        theta = np.concatenate([F.ravel(), w])
        assert finite_difference_check(loss, theta, np.concatenate([dF.ravel(), g.w])) < 1e-7
        assert not dF[0, 0].any()


class TestDenseSoftmax:
    def test_uniform(self):
        p = nn.dense_softmax(np.ones(3), np.zeros((4, 3)), np.zeros(4))
        np.testing.assert_allclose(p, [0.25] * 4, atol=1e-16)

    def test_shift_invariance(self):
        rng = np.random.default_rng(9)
        v, W, b = rng.normal(size=3), rng.normal(size=(5, 3)), rng.normal(size=5)
        np.testing.assert_allclose(nn.dense_softmax(v, W, b), nn.dense_softmax(v, W, b + 37.5), atol=1e-15)

    def test_log_bias(self):
        p = nn.dense_softmax(np.ones(2), np.zeros((3, 2)), np.log([1.0, 2.0, 3.0]))
        np.testing.assert_allclose(p, [1 / 6, 2 / 6, 3 / 6], atol=1e-15)

    def test_extreme_logits_stay_finite(self):
        p = nn.softmax(np.array([1000.0, -1000.0, 999.0]))
        assert np.isfinite(p).all() and abs(p.sum() - 1) < 1e-12

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            nn.dense_softmax(np.ones(2), np.zeros((3, 4)), np.zeros(3))


class TestCrossEntropy:
    def test_one_hot(self):
        assert nn.cross_entropy(np.array([0.0, 1.0, 0.0]), 1) == 0.0

    def test_uniform(self):
        assert nn.cross_entropy(np.full(4, 0.25), 2) == pytest.approx(math.log(4), abs=1e-15)
        assert nn.cross_entropy(np.full(4, 0.25), 2) == pytest.approx(1.38629, abs=1e-5)

    def test_scalar(self):
        assert nn.cross_entropy(np.array([0.1, 0.9]), 1) == pytest.approx(0.10536, abs=1e-5)

    def test_clamped(self):
        assert nn.cross_entropy(np.array([1.0, 0.0]), 1) == pytest.approx(-math.log(1e-12))

    def test_target_out_of_range(self):
        with pytest.raises(IndexError):
            nn.cross_entropy(np.array([0.5, 0.5]), 2)

    def test_matches_oracle(self):
        rng = np.random.default_rng(10)
        for _ in range(200):
            p = rng.dirichlet(np.ones(rng.integers(2, 9)))
            t = int(rng.integers(len(p)))
            assert abs(nn.cross_entropy(p, t) - oracles.cross_entropy(p.tolist(), t)) <= 1e-12


class TestFiniteDifferenceCheck:
    def test_quadratic(self):
        theta = np.random.default_rng(11).normal(size=20)
        assert finite_difference_check(lambda t: 0.5 * t @ t, theta, theta) < 1e-9

    def test_detects_corruption(self):
        theta = np.random.default_rng(12).normal(size=20)
        assert finite_difference_check(lambda t: 0.5 * t @ t, theta, theta * 1.01) > 1e-3

    def test_sampled_coordinates(self):
        theta = np.random.default_rng(13).normal(size=200)
        assert finite_difference_check(lambda t: 0.5 * t @ t, theta, theta, n_samples=10) < 1e-7

    def test_non_finite_loss(self):
        with pytest.raises(FloatingPointError):
            finite_difference_check(lambda t: float("nan"), np.zeros(2), np.zeros(2))
