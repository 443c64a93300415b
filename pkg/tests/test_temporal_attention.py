import numpy as np
import pytest

from coupa import nn_core as nc
from helpers import assert_close_grad, finite_difference
from coupa import temporal_attention as ta
from coupa import time_encoding as te

CFG = te.TimeEncodingConfig(frequencies=(3600.0, 86400.0), harmonics=1)


def test_empty_history_yields_single_target_row():
    target = np.array([0.5, -0.5])
    m = ta.build_temporal_matrix(np.zeros((0, 2)), np.array([]), target, t=1000.0,
                                 config=CFG, max_len=50)
    assert m.n_rows == 1
    assert np.allclose(m.rows[0, :2], target)
    assert np.allclose(m.rows[0, 2:], te.encode(0.0, CFG))
    assert m.intervals[0] == 0.0


def test_rows_encode_elapsed_intervals():
    t = 10_000.0
    times = np.array([t - 3600.0, t - 60.0])
    vecs = np.array([[1.0, 0.0], [0.0, 1.0]])
    target = np.array([2.0, 2.0])
    m = ta.build_temporal_matrix(vecs, times, target, t, CFG)
    assert m.n_rows == 3
    assert np.allclose(m.intervals, [3600.0, 60.0, 0.0])
    assert np.allclose(m.rows[0, 2:], te.encode(3600.0, CFG))
    assert np.allclose(m.rows[1, 2:], te.encode(60.0, CFG))
    assert np.allclose(m.rows[2, :2], target)


def test_truncation_keeps_most_recent():
    n = 80
    times = np.arange(n, dtype=float)
    vecs = np.arange(n, dtype=float)[:, None] * np.ones((1, 2))
    m = ta.build_temporal_matrix(vecs, times, np.zeros(2), t=100.0, config=CFG, max_len=50)
    assert m.n_rows == 51
    # earliest 30 behaviors dropped; first kept row is event index 30
    assert m.rows[0, 0] == 30.0
    assert m.intervals[0] == 70.0


def test_rejects_history_at_or_after_target_time():
    with pytest.raises(ValueError):
        ta.build_temporal_matrix(np.ones((1, 2)), np.array([5.0]), np.zeros(2), t=5.0, config=CFG)
    with pytest.raises(ValueError):
        ta.build_temporal_matrix(np.ones((2, 2)), np.array([2.0, 1.0]), np.zeros(2), t=5.0, config=CFG)


def _params(rng: np.random.Generator, width: int, dim: int) -> ta.AttentionParams:
    return ta.AttentionParams(w_query=rng.normal(size=(width, dim)),
                              w_key=rng.normal(size=(width, dim)),
                              w_value=rng.normal(size=(width, dim)))


def test_zero_matrix_gives_uniform_weights_and_zero_output():
    rng = np.random.default_rng(0)
    params = _params(rng, width=6, dim=4)
    z = np.zeros((5, 6))
    h, weights = ta.attend(z, params)
    assert np.allclose(weights, 1.0 / 5.0)
    assert np.allclose(h, 0.0)


def test_single_row_weight_one():
    rng = np.random.default_rng(1)
    params = _params(rng, width=4, dim=3)
    z = rng.normal(size=(1, 4))
    h, weights = ta.attend(z, params)
    assert np.allclose(weights, [[1.0]])
    assert np.allclose(h, z[0] @ params.w_value)


def test_three_row_case_matches_hand_computation():
    rng = np.random.default_rng(42)
    params = _params(rng, width=5, dim=4)
    z = rng.normal(size=(3, 5))
    h, weights = ta.attend(z, params)

    # independent straight-line recomputation
    q = z @ params.w_query
    k = z @ params.w_key
    v = z @ params.w_value
    scores = q @ k.T / 2.0  # sqrt(4)
    expected_w = np.exp(scores) / np.exp(scores).sum(axis=1, keepdims=True)
    assert np.allclose(weights, expected_w, atol=1e-12)
    assert np.allclose(h, (expected_w @ v)[-1], atol=1e-12)


def test_weights_rows_sum_to_one():
    rng = np.random.default_rng(7)
    for _ in range(20):
        params = _params(rng, width=6, dim=5)
        z = rng.normal(size=(rng.integers(1, 10), 6)) * 3.0
        _, weights = ta.attend(z, params)
        assert np.all(weights >= 0.0)
        assert np.allclose(weights.sum(axis=1), 1.0, atol=1e-12)


def test_history_permutation_leaves_target_summary_unchanged():
    rng = np.random.default_rng(9)
    params = _params(rng, width=6, dim=4)
    z = rng.normal(size=(4, 6))
    h, w = ta.attend(z, params)
    perm = z.copy()
    perm[[0, 2]] = perm[[2, 0]]  # swap two history rows, target row stays last
    h_perm, w_perm = ta.attend(perm, params)
    assert np.allclose(h, h_perm, atol=1e-12)
    # the swapped rows' own weights follow them
    assert np.allclose(w[-1, [0, 2]], w_perm[-1, [2, 0]], atol=1e-12)


def test_attend_graph_matches_reference_and_is_differentiable():
    rng = np.random.default_rng(3)
    width, dim = 5, 4
    params_dict: dict[str, nc.Parameter] = {}
    params = ta.init_attention_params(rng, width, dim, params_dict)
    z_np = rng.normal(size=(2, 3, width))
    out = ta.attend_graph(nc.Tensor(z_np), params)
    for b in range(2):
        ref, _ = ta.attend(z_np[b], params)
        assert np.allclose(out.data[b, -1], ref, atol=1e-12)

    # gradient check through the target-row summary
    nc.zero_grads(list(params_dict.values()))
    loss = nc.tsum(nc.square(nc.take(out, (slice(None), -1, slice(None)))))
    loss.backward()

    for p in params_dict.values():
        analytic = p.grad.copy()

        def value(arr, p=p):
            saved = p.data.copy()
            p.data[...] = arr
            o = ta.attend_graph(nc.Tensor(z_np), params)
            val = nc.tsum(nc.square(nc.take(o, (slice(None), -1, slice(None))))).item()
            p.data[...] = saved
            return val

        numeric = finite_difference(value, p.data.copy())
        assert_close_grad(analytic, numeric)


def test_attend_graph_key_mask_zeroes_padded_rows():
    rng = np.random.default_rng(11)
    width, dim = 4, 3
    params_dict: dict[str, nc.Parameter] = {}
    params = ta.init_attention_params(rng, width, dim, params_dict)

    real = rng.normal(size=(3, width))
    padded = np.vstack([real[:2], rng.normal(size=(2, width)), real[2:]])  # junk rows 2,3
    mask = np.array([[1, 1, 0, 0, 1]], dtype=float)
    out_masked = ta.attend_graph(nc.Tensor(padded[None]), params, key_mask=mask)
    out_clean = ta.attend_graph(nc.Tensor(real[None]), params)
    assert np.allclose(out_masked.data[0, -1], out_clean.data[0, -1], atol=1e-12)
