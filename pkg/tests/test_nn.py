import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gradutil import check_op, check_params
from phrec import nn
from phrec.nn import layers as L

TOL = 1e-5


def test_shape_error_names_op():
    with pytest.raises(nn.ShapeError, match="dot_interaction"):
        L.dot_interaction_forward(np.zeros((2, 3)), np.zeros((2, 4)))
    lin = nn.Linear(3, 2, np.random.default_rng(0))
    with pytest.raises(nn.ShapeError, match="linear"):
        lin.forward(np.zeros((4, 5)))


@pytest.mark.parametrize("name", ["tanh", "relu", "softmax"])
def test_elementwise_gradients(name, rng):
    fwd = getattr(L, f"{name}_forward")
    bwd = getattr(L, f"{name}_backward")
    x = rng.standard_normal((5, 7))
    assert max(check_op(fwd, bwd, [x], rng)) <= TOL


def test_softmax_rows_sum_to_one(rng):
    p, _ = L.softmax_forward(rng.standard_normal((6, 9)) * 30)
    assert np.all(np.abs(p.sum(axis=1) - 1.0) <= 1e-12)


def test_max_pool_gradient(rng):
    x = rng.standard_normal((5, 7))
    assert max(check_op(L.max_pool_over_time_forward, L.max_pool_over_time_backward, [x], rng)) <= TOL


def test_k_max_pool_example():
    out, _ = L.k_max_pool_forward(np.array([0.1, 0.9, 0.5]), 2)
    assert out.tolist() == [0.9, 0.5]


def test_k_max_pool_pads_short_input():
    out, _ = L.k_max_pool_forward(np.array([0.3, -0.2]), 4)
    assert out.tolist() == [0.3, -0.2, 0.0, 0.0]


def test_k_max_pool_ties_prefer_earlier():
    out, (idx, _) = L.k_max_pool_forward(np.array([1.0, 2.0, 1.0, 1.0]), 2)
    assert idx.tolist() == [0, 1]


@given(st.lists(st.floats(-5, 5), min_size=1, max_size=30), st.integers(1, 10))
def test_k_max_pool_is_subsequence_of_largest(values, k):
    x = np.array(values)
    out, (idx, _) = L.k_max_pool_forward(x, k)
    kept = x[idx]
    assert list(idx) == sorted(idx)
    if len(x) > k:
        assert len(idx) == k
        assert kept.min() >= np.sort(x)[-k]
    assert np.array_equal(out[: len(idx)], kept)


def test_k_max_pool_gradient(rng):
    x = rng.standard_normal(35)
    assert max(check_op(lambda a: L.k_max_pool_forward(a, 12), L.k_max_pool_backward, [x], rng)) <= TOL


def test_l2_normalize_and_dot_interaction_gradients(rng):
    a, b = rng.standard_normal((5, 7)), rng.standard_normal((4, 7))
    assert max(check_op(L.l2_normalize_forward, L.l2_normalize_backward, [a], rng)) <= TOL
    assert max(check_op(L.dot_interaction_forward, L.dot_interaction_backward, [a, b], rng)) <= TOL


def test_dot_interaction_entries_bounded(rng):
    m, _ = L.dot_interaction_forward(rng.standard_normal((6, 4)), rng.standard_normal((3, 4)))
    assert np.all(np.abs(m) <= 1.0 + 1e-12)


def test_asym_cosine_examples():
    s, _ = L.asym_cosine_forward(np.array([2.0, 0.0]), np.array([1.0, 0.0]), 0.85)
    assert s == pytest.approx(2 ** -0.7, rel=1e-12)
    assert s == pytest.approx(0.6156, abs=1e-4)
    x = np.array([0.3, -1.2, 4.0])
    assert L.asym_cosine_forward(x, x, 0.85)[0] == pytest.approx(1.0, rel=1e-12)
    assert L.asym_cosine_forward(np.zeros(3), x, 0.85) == (0.0, None)
    assert L.asym_cosine_backward(1.0, None) == (None, None)


@given(st.integers(0, 10_000), st.floats(0.01, 100), st.floats(0.01, 100))
def test_cosine_scale_invariant(seed, a, b):
    r = np.random.default_rng(seed)
    x, y = r.standard_normal(5), r.standard_normal(5)
    base = L.cosine_forward(x, y)[0]
    assert L.asym_cosine_forward(a * x, b * y, 0.5)[0] == pytest.approx(base, rel=1e-9, abs=1e-12)
    assert -1.0 - 1e-12 <= base <= 1.0 + 1e-12


def test_asym_cosine_gradient(rng):
    x, y = rng.standard_normal(7), rng.standard_normal(7)
    for alpha in (0.5, 0.85):
        def fwd(a, b):
            s, c = L.asym_cosine_forward(a, b, alpha)
            return np.array(s), c

        assert max(check_op(fwd, lambda d, c: L.asym_cosine_backward(float(d), c), [x, y], rng)) <= TOL


def test_rbf_kernel_pool_examples():
    sigma = 0.05
    phi, _ = L.rbf_kernel_pool_forward(np.array([[0.4]]), [0.4], sigma)
    assert phi[0] == pytest.approx(math.log(1 + 1e-10), abs=1e-15)
    phi, _ = L.rbf_kernel_pool_forward(np.array([[0.4 + sigma]]), [0.4], sigma)
    assert math.exp(phi[0]) == pytest.approx(math.exp(-0.5) + 1e-10, rel=1e-12)
    assert math.exp(-0.5) == pytest.approx(0.6065, abs=1e-4)
    phi, _ = L.rbf_kernel_pool_forward(np.full((3, 2), 0.4 + 20 * sigma), [0.4], sigma)
    assert phi[0] == pytest.approx(3 * math.log(1e-10), rel=1e-9)


def test_rbf_kernel_pool_gradient(rng):
    m = np.tanh(rng.standard_normal((5, 7)))
    mus = np.linspace(-1, 1, 6)
    assert max(check_op(lambda x: L.rbf_kernel_pool_forward(x, mus, 0.2), L.rbf_kernel_pool_backward, [m], rng)) <= TOL
    with pytest.raises(ValueError):
        L.rbf_kernel_pool_forward(m, mus, 0.0)


def test_linear_gradients(rng):
    lin = nn.Linear(7, 4, rng)
    x = rng.standard_normal((5, 7))
    assert max(check_op(lin.forward, lin.backward, [x], rng)) <= TOL
    assert max(check_params(lin, lambda: lin.forward(x), lin.backward, rng).values()) <= TOL


def test_conv1d_identity_kernel(rng):
    conv = nn.Conv1d(4, 1, 4, rng)
    conv.W.value[...] = np.eye(4)
    x = rng.standard_normal((6, 4))
    out, _ = conv.forward(x)
    assert np.array_equal(out, x)


@pytest.mark.parametrize("width", [1, 2, 3])
@pytest.mark.parametrize("n", [5, 2])
def test_conv1d_gradients(width, n, rng):
    conv = nn.Conv1d(7, width, 4, rng)
    x = rng.standard_normal((n, 7))
    assert max(check_op(conv.forward, conv.backward, [x], rng)) <= TOL
    assert max(check_params(conv, lambda: conv.forward(x), conv.backward, rng).values()) <= TOL


def test_conv1d_short_input_is_zero_padded(rng):
    conv = nn.Conv1d(3, 3, 2, rng)
    x = rng.standard_normal((1, 3))
    out, _ = conv.forward(x)
    assert out.shape == (1, 2)
    expected = x[0] @ conv.W.value[:3] + conv.b.value
    assert np.allclose(out[0], expected)


@pytest.mark.parametrize("cls", [nn.LSTM, nn.BiLSTM])
def test_lstm_gradients(cls, rng):
    lstm = cls(7, 3, rng)
    x = rng.standard_normal((5, 7))
    assert max(check_op(lstm.forward, lstm.backward, [x], rng)) <= TOL
    assert max(check_params(lstm, lambda: lstm.forward(x), lstm.backward, rng).values()) <= TOL


def test_bilstm_output_shape(rng):
    h, _ = nn.BiLSTM(4, 32, rng).forward(rng.standard_normal((6, 4)))
    assert h.shape == (6, 64)


def _attn_fns(attn):
    def fwd_m(H):
        (M, _), cache = attn.forward(H)
        return M, cache

    return fwd_m, attn.backward


@pytest.mark.parametrize("penalty", [0.0, 0.7])
def test_self_attention_gradients(penalty, rng):
    attn = nn.SelfAttention(7, 6, 3, rng, penalty=penalty)
    H = rng.standard_normal((5, 7))
    fwd, bwd = _attn_fns(attn)
    if penalty:
        # the checked scalar includes the penalty term
        R = rng.standard_normal((3, 7))

        def loss():
            (M, A), _ = attn.forward(H)
            return float(np.sum(M * R)) + penalty * attn.penalty_term(A)

        attn.zero_grad()
        _, cache = attn.forward(H)
        dH = attn.backward(R, cache)
        assert nn.relative_error(dH, nn.numeric_grad(loss, H)) <= TOL
        for _, p in attn.named_parameters():
            assert nn.relative_error(p.grad, nn.numeric_grad(loss, p.value)) <= TOL
    else:
        assert max(check_op(fwd, bwd, [H], rng)) <= TOL
        assert max(check_params(attn, lambda: fwd(H), bwd, rng).values()) <= TOL


def test_self_attention_rows_and_single_unit(rng):
    attn = nn.SelfAttention(4, 5, 15, rng)
    (M, A), _ = attn.forward(rng.standard_normal((6, 4)))
    assert A.shape == (15, 6)
    assert np.allclose(A.sum(axis=1), 1.0, atol=1e-12)
    H = rng.standard_normal((1, 4))
    (M, A), _ = attn.forward(H)
    assert np.array_equal(A, np.ones((15, 1)))
    assert np.allclose(M, np.repeat(H, 15, axis=0))


def test_module_parameter_names(rng):
    lstm = nn.BiLSTM(3, 2, rng)
    names = [n for n, _ in lstm.named_parameters()]
    assert names == ["fwd.Wx", "fwd.Wh", "fwd.b", "bwd.Wx", "bwd.Wh", "bwd.b"]


# --------------------------------------------------------------------------
# optimizers


def test_adam_zero_gradient_leaves_params():
    p = nn.Parameter(np.array([1.0, -2.0]))
    opt = nn.Adam([p], lr=0.01)
    opt.step()
    assert p.value.tolist() == [1.0, -2.0]


def test_adam_first_step():
    p = nn.Parameter(np.array([0.5]))
    p.grad[...] = 1.0
    nn.Adam([p], lr=0.01).step()
    # bias-corrected m/sqrt(v) is exactly 1 on the first step
    assert p.value[0] - 0.5 == pytest.approx(-0.01 / (1 + 1e-8), rel=1e-12)


def test_adagrad_step():
    p = nn.Parameter(np.array([1.0]))
    p.grad[...] = 2.0
    nn.Adagrad([p], lr=0.1).step()
    assert p.value[0] == pytest.approx(1.0 - 0.1 * 2.0 / (2.0 + 1e-10))


def test_optimizer_skips_frozen_and_is_deterministic():
    def run():
        a = nn.Parameter(np.ones(3))
        frozen = nn.Parameter(np.ones(3), trainable=False)
        opt = nn.make_optimizer("adam", [a, frozen], 0.1)
        r = np.random.default_rng(5)
        for _ in range(4):
            a.grad[...] = r.standard_normal(3)
            frozen.grad[...] = 1.0
            opt.step()
            opt.zero_grad()
        return a.value, frozen.value

    (a1, f1), (a2, _) = run(), run()
    assert np.array_equal(a1, a2)
    assert f1.tolist() == [1.0, 1.0, 1.0]
    with pytest.raises(ValueError):
        nn.make_optimizer("sgd9", [], 0.1)


# --------------------------------------------------------------------------
# tensors and checkpoints


def test_parameter_grad_shape_and_finite_check():
    p = nn.Parameter(np.zeros((2, 3)))
    assert p.grad.shape == p.shape
    with pytest.raises(Exception):
        nn.check_finite(np.array([1.0, np.nan]), "x")


def test_default_dtype_switch():
    nn.set_default_dtype(np.float32)
    try:
        assert nn.default_dtype() == np.float32
    finally:
        nn.set_default_dtype(np.float64)
    with pytest.raises(ValueError):
        nn.set_default_dtype(np.int32)


def test_float32_gradcheck_is_looser(rng):
    lin = nn.Linear(7, 4, rng)
    x = rng.standard_normal((5, 7)).astype(np.float32)
    lin.W.value = lin.W.value.astype(np.float32)
    out, cache = lin.forward(x)
    R = rng.standard_normal(out.shape).astype(np.float32)
    dx = lin.backward(R, cache)
    num = nn.numeric_grad(lambda: float(np.sum(lin.forward(x)[0] * R, dtype=np.float64)), x, h=1e-2)
    assert nn.relative_error(dx, num) <= 1e-3


def test_checkpoint_round_trip(tmp_path, rng):
    named = [("a", rng.standard_normal((2, 3))), ("b.c", nn.Parameter(rng.standard_normal(4)))]
    path = nn.save_checkpoint(tmp_path / "m.word", named, {"k": 1})
    assert path.name == "m.word.json"
    assert (tmp_path / "m.word.bin").stat().st_size == 10 * 8
    state, meta = nn.load_checkpoint(tmp_path / "m.word.json")
    assert np.array_equal(state["a"], named[0][1])
    assert np.array_equal(state["b.c"], named[1][1].value)
    assert meta == {"k": 1}
