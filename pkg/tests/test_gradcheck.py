"""The finite-difference oracle itself, and layer-level gradient checks."""

import numpy as np
import pytest

from mlse.nn import (
    LstmParams,
    SparseRowGrad,
    bilstm_backward,
    bilstm_forward,
    embedding_grad,
    finite_diff_check,
    lstm_seq_backward,
    lstm_seq_forward,
    maxpool_time,
    maxpool_time_backward,
)

TOL = 1e-4


class TestFiniteDiffCheck:
    def test_accepts_correct_gradient(self):
        w = np.array([0.3, -0.7, 1.1])
        params = {"w": w}
        err, report = finite_diff_check(
            lambda p: float((p["w"] ** 2).sum()), params, {"w": 2 * w}
        )
        assert err < 1e-9
        assert set(report) == {"w"}

    def test_rejects_wrong_gradient(self):
        w = np.array([0.5, 0.25])
        err, _ = finite_diff_check(
            lambda p: float((p["w"] ** 2).sum()), {"w": w}, {"w": 3 * w}
        )
        assert err > 0.3

    def test_restores_parameters(self):
        w = np.array([1.0, 2.0])
        finite_diff_check(lambda p: float(p["w"].sum()), {"w": w}, {"w": np.ones(2)})
        np.testing.assert_array_equal(w, [1.0, 2.0])

    def test_missing_gradient_entry(self):
        with pytest.raises(KeyError, match="no analytic gradient"):
            finite_diff_check(lambda p: 0.0, {"w": np.zeros(2)}, {})

    def test_sparse_row_grad_expanded(self):
        table = np.random.default_rng(0).normal(size=(5, 3))
        ids = np.array([[0, 2, 2]])
        r = np.random.default_rng(1).normal(size=(1, 3, 3))

        def loss(p):
            return float((p["table"][ids] * r).sum())

        rows, grads = embedding_grad(table.shape, ids, r, table.dtype)
        err, _ = finite_diff_check(
            loss, {"table": table}, {"table": SparseRowGrad(rows, grads)}
        )
        assert err < 1e-8

    def test_subsamples_large_tensors(self):
        w = np.random.default_rng(2).normal(size=(40, 40))
        err, _ = finite_diff_check(
            lambda p: float((p["w"] ** 2).sum()),
            {"w": w},
            {"w": 2 * w},
            max_coords=16,
        )
        # The loss is O(1600), so finite-difference cancellation noise
        # is visible; the check only needs to clear the working bound.
        assert err < TOL


def _seq_setup(seed, input_dim=3, nhid=4, B=2, T=5):
    rng = np.random.default_rng(seed)
    p = LstmParams.init(input_dim, nhid, rng, dtype=np.float64)
    x = rng.normal(size=(B, T, input_dim))
    mask = np.ones((B, T))
    mask[0, T - 2 :] = 0.0
    r = rng.normal(size=(B, T, nhid))
    return p, x, mask, r


class TestLstmSeqGradients:
    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_masked_sequence(self, seed):
        p, x, mask, r = _seq_setup(seed)
        params = {"w_x": p.w_x, "w_h": p.w_h, "b": p.b, "x": x}

        def loss(q):
            h_seq, _, _ = lstm_seq_forward(q["x"], mask, p)
            return float((h_seq * r).sum())

        _, _, _, g = lstm_seq_backward(r, lstm_seq_forward(x, mask, p)[2])
        dx = lstm_seq_backward(r, lstm_seq_forward(x, mask, p)[2])[0]
        analytic = {"w_x": g.w_x, "w_h": g.w_h, "b": g.b, "x": dx}
        err, _ = finite_diff_check(loss, params, analytic)
        assert err < TOL

    def test_final_state_gradient(self):
        p, x, mask, _ = _seq_setup(7)
        rng = np.random.default_rng(11)
        r_h = rng.normal(size=(2, 4))
        r_c = rng.normal(size=(2, 4))

        def loss(q):
            _, (hT, cT), _ = lstm_seq_forward(q["x"], mask, p)
            return float((hT * r_h).sum() + (cT * r_c).sum())

        h_seq, _, cache = lstm_seq_forward(x, mask, p)
        dx, _, _, g = lstm_seq_backward(
            np.zeros_like(h_seq), cache, d_hT=r_h, d_cT=r_c
        )
        err, _ = finite_diff_check(
            loss,
            {"w_x": p.w_x, "w_h": p.w_h, "b": p.b, "x": x},
            {"w_x": g.w_x, "w_h": g.w_h, "b": g.b, "x": dx},
        )
        assert err < TOL


class TestBilstmMaxpoolGradients:
    @pytest.mark.parametrize("seed", [3, 4])
    def test_pooled_representation(self, seed):
        rng = np.random.default_rng(seed)
        p_f = LstmParams.init(3, 2, rng, dtype=np.float64)
        p_b = LstmParams.init(3, 2, rng, dtype=np.float64)
        x = rng.normal(size=(2, 4, 3))
        mask = np.ones((2, 4))
        mask[1, 3] = 0.0
        r = rng.normal(size=(2, 4))

        def loss(q):
            h, _ = bilstm_forward(q["x"], mask, p_f, p_b)
            pooled, _ = maxpool_time(h, mask)
            return float((pooled * r).sum())

        h, cache = bilstm_forward(x, mask, p_f, p_b)
        pooled, pcache = maxpool_time(h, mask)
        dh = maxpool_time_backward(r, pcache)
        dx, g_f, g_b = bilstm_backward(dh, cache)
        params = {
            "fwd.w_x": p_f.w_x, "fwd.w_h": p_f.w_h, "fwd.b": p_f.b,
            "bwd.w_x": p_b.w_x, "bwd.w_h": p_b.w_h, "bwd.b": p_b.b,
            "x": x,
        }
        analytic = {
            "fwd.w_x": g_f.w_x, "fwd.w_h": g_f.w_h, "fwd.b": g_f.b,
            "bwd.w_x": g_b.w_x, "bwd.w_h": g_b.w_h, "bwd.b": g_b.b,
            "x": dx,
        }
        err, _ = finite_diff_check(loss, params, analytic)
        assert err < TOL
