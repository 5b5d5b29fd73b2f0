import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from symforecast.neural import (
    Adam,
    LstmStackParams,
    adam_step,
    backward_window,
    cell_forward,
    init_params,
    loss_mse,
    loss_xent,
    mse_grad,
    parameter_count,
    softmax,
    stack_forward,
    window_forward,
    xent_grad,
)


def scalar_cell(w, h, c, x):
    """Plain-float oracle for a 1-cell, 1-input layer with all weights ``w`` and zero biases."""
    sig = lambda v: 1.0 / (1.0 + math.exp(-v))
    z = w * x + w * h
    f = i = o = sig(z)
    u = math.tanh(z)
    c_new = f * c + i * u
    return o * math.tanh(c_new), c_new


def scalar_params(w=1.0, layers=1, head_w=1.0):
    p = LstmStackParams(1, [1] * layers, 1, "linear")
    for layer in p.layers:
        layer.Wx[...] = w
        layer.Wh[...] = w
    p.head_W[...] = head_w
    return p


def random_params(rng, d, hidden, out, head, scale=0.5):
    p = LstmStackParams(d, hidden, out, head)
    p.theta[:] = rng.normal(0.0, scale, p.theta.size)
    return p


# ---------------------------------------------------------------------------
# forward


def test_zero_weights_give_half_gates():
    p = LstmStackParams(3, [4], 1)
    (h, c), (f, i, o, u) = cell_forward(p.layers[0], (np.zeros(4), np.zeros(4)), np.array([1.0, -2.0, 5.0]))
    np.testing.assert_array_equal(f, 0.5)
    np.testing.assert_array_equal(i, 0.5)
    np.testing.assert_array_equal(o, 0.5)
    np.testing.assert_array_equal(u, 0.0)
    np.testing.assert_array_equal(c, 0.0)
    np.testing.assert_array_equal(h, 0.0)


def test_saturated_forget_gate_keeps_cell(rng):
    p = random_params(rng, 2, [3], 1, "linear")
    layer = p.layers[0]
    layer.b_f[...] = 50.0
    c0 = np.array([0.3, -0.6, 0.9])
    (h, c), (f, i, o, u) = cell_forward(layer, (np.zeros(3), c0), np.array([0.2, -0.1]))
    np.testing.assert_allclose(c, c0 + i * u, atol=1e-12)


def test_scalar_cell_oracle():
    p = scalar_params()
    (h, c), (f, i, o, u) = cell_forward(p.layers[0], (np.zeros(1), np.zeros(1)), np.array([1.0]))
    assert f[0] == pytest.approx(0.7310585786300049, abs=1e-12)
    assert u[0] == pytest.approx(0.7615941559557649, abs=1e-12)
    assert c[0] == pytest.approx(0.5567699411459397, abs=1e-12)
    assert h[0] == pytest.approx(0.36960635293570576, abs=1e-12)


def test_gate_views_share_memory():
    p = LstmStackParams(2, [3], 1)
    p.layers[0].W_ox[...] = 7.0
    assert np.all(p.layers[0].Wx[6:9] == 7.0)
    p.layers[0].r[...] = 1.0
    assert np.all(p.layers[0].bh[9:12] == 1.0)
    assert np.count_nonzero(p.theta) == 6 + 3


def test_dimension_mismatch_raises():
    p = LstmStackParams(2, [3], 1)
    with pytest.raises(ValueError):
        cell_forward(p.layers[0], (np.zeros(3), np.zeros(3)), np.zeros(4))
    with pytest.raises(ValueError):
        window_forward(p, p.zero_states(), np.zeros((3, 5)))
    with pytest.raises(ValueError):
        window_forward(p, p.zero_states(), np.zeros((0, 2)))


def test_linear_head_with_zero_weights_outputs_zero(rng):
    p = random_params(rng, 2, [3], 1, "linear")
    p.head_W[...] = 0.0
    p.head_b[...] = 0.0
    _, out = stack_forward(p, p.zero_states(), rng.normal(size=2))
    assert out[0] == 0.0


def test_softmax_uniform_and_shift_invariant():
    np.testing.assert_allclose(softmax(np.zeros(3)), [1 / 3] * 3, atol=1e-15)
    z = np.array([0.3, -2.0, 5.0])
    assert softmax(z).sum() == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(softmax(z), softmax(z + 123.4), atol=1e-12)


def test_two_layer_scalar_stack_matches_oracle():
    p = scalar_params(w=0.7, layers=2, head_w=1.3)
    p.head_b[...] = 0.1
    states = p.zero_states()
    h1 = c1 = h2 = c2 = 0.0
    for x in [1.0, -0.5, 2.0]:
        states, out = stack_forward(p, states, np.array([x]))
        h1, c1 = scalar_cell(0.7, h1, c1, x)
        h2, c2 = scalar_cell(0.7, h2, c2, h1)
        assert out[0] == pytest.approx(1.3 * h2 + 0.1, abs=1e-12)
    assert states[0][0][0] == pytest.approx(h1, abs=1e-12)
    assert states[1][1][0] == pytest.approx(c2, abs=1e-12)


def test_window_of_three_matches_scalar_oracle():
    p = scalar_params(w=1.0)
    xs = [1.0, 0.5, -1.0]
    h = c = 0.0
    for x in xs:
        h, c = scalar_cell(1.0, h, c, x)
    finals, out, _ = window_forward(p, p.zero_states(), np.array(xs)[:, None])
    assert out[0] == pytest.approx(h, abs=1e-12)
    assert finals[0][1][0] == pytest.approx(c, abs=1e-12)


def test_window_of_one_equals_stack_forward(rng):
    p = random_params(rng, 3, [4, 2], 2, "softmax")
    x = rng.normal(size=3)
    states = [(rng.uniform(-1, 1, n), rng.uniform(-1, 1, n)) for n in p.hidden]
    s1, out1 = stack_forward(p, states, x)
    s2, out2, _ = window_forward(p, states, x[None, :])
    np.testing.assert_allclose(out1, out2, atol=1e-14)
    for a, b in zip(s1, s2):
        np.testing.assert_allclose(a[0], b[0], atol=1e-14)
        np.testing.assert_allclose(a[1], b[1], atol=1e-14)


def test_zero_dropout_ignores_rng(rng):
    p = random_params(rng, 1, [5, 5], 1, "linear")
    X = rng.normal(size=(6, 1))
    a = window_forward(p, p.zero_states(), X, 0.0, np.random.default_rng(1))[1]
    b = window_forward(p, p.zero_states(), X, 0.0, np.random.default_rng(2))[1]
    np.testing.assert_array_equal(a, b)


def test_dropout_changes_output_and_needs_rng(rng):
    p = random_params(rng, 1, [8, 8], 1, "linear")
    X = rng.normal(size=(4, 1))
    plain = window_forward(p, p.zero_states(), X)[1]
    dropped = window_forward(p, p.zero_states(), X, 0.5, np.random.default_rng(0))[1]
    assert not np.allclose(plain, dropped)
    with pytest.raises(ValueError):
        window_forward(p, p.zero_states(), X, 0.5)


@given(st.integers(0, 10_000), st.integers(1, 12))
def test_hidden_state_bounded(seed, steps):
    rng = np.random.default_rng(seed)
    p = random_params(rng, 2, [3, 2], 1, "linear", scale=3.0)
    states = p.zero_states()
    for t in range(1, steps + 1):
        states, _ = stack_forward(p, states, rng.normal(0, 5, 2))
        for h, c in states:
            assert np.max(np.abs(h)) <= 1.0
            # f + i can exceed one, so the cell state only obeys |c_t| <= t
            assert np.max(np.abs(c)) <= t


# ---------------------------------------------------------------------------
# losses


def test_losses():
    assert loss_mse(np.array([2.0]), 2.0) == 0.0
    assert loss_xent(np.array([1.0, 0.0, 0.0]), 0) == 0.0
    assert loss_xent(np.array([0.5, 0.25, 0.25]), 1) == pytest.approx(1.3862943611198906, abs=1e-12)
    assert np.isfinite(loss_xent(np.array([1.0, 0.0]), 1))


# ---------------------------------------------------------------------------
# backward


def finite_difference(p, states, X, loss_fn, h=1e-5):
    fd = np.zeros_like(p.theta)
    for j in range(p.theta.size):
        e = np.zeros_like(p.theta)
        e[j] = h
        plus = loss_fn(window_forward(p.like(p.theta + e), states, X)[1])
        minus = loss_fn(window_forward(p.like(p.theta - e), states, X)[1])
        fd[j] = (plus - minus) / (2 * h)
    return fd


@pytest.mark.parametrize("head", ["linear", "softmax"])
def test_gradient_matches_finite_differences(rng, head):
    out = 3 if head == "softmax" else 1
    p = random_params(rng, 2, [3], out, head)
    X = rng.normal(size=(4, 2))
    states = [(rng.uniform(-0.5, 0.5, 3), rng.uniform(-0.5, 0.5, 3))]
    if head == "softmax":
        loss_fn, grad_fn = (lambda o: loss_xent(o, 2)), (lambda o: xent_grad(o, 2))
    else:
        loss_fn, grad_fn = (lambda o: loss_mse(o, 0.3)), (lambda o: mse_grad(o, 0.3))
    _, o, cache = window_forward(p, states, X)
    g = backward_window(p, cache, grad_fn(o)).theta
    fd = finite_difference(p, states, X, loss_fn)
    assert np.all(np.abs(g - fd) <= 1e-4 * np.maximum(np.abs(fd), 1e-3))


def test_zero_loss_gradient_gives_zero_grads(rng):
    p = random_params(rng, 2, [3, 3], 1, "linear")
    _, _, cache = window_forward(p, p.zero_states(), rng.normal(size=(5, 2)))
    assert not np.any(backward_window(p, cache, np.zeros(1)).theta)


def test_head_bias_gradient_is_loss_derivative(rng):
    p = random_params(rng, 1, [4], 1, "linear")
    _, out, cache = window_forward(p, p.zero_states(), rng.normal(size=(3, 1)))
    g = backward_window(p, cache, mse_grad(out, 1.0))
    assert g.head_b[0] == pytest.approx(2 * (out[0] - 1.0), abs=1e-14)


def test_backward_accumulates(rng):
    p = random_params(rng, 1, [2], 1, "linear")
    _, out, cache = window_forward(p, p.zero_states(), rng.normal(size=(3, 1)))
    once = backward_window(p, cache, np.ones(1))
    twice = backward_window(p, cache, np.ones(1), once.copy())
    np.testing.assert_allclose(twice.theta, 2 * once.theta)


# ---------------------------------------------------------------------------
# Adam


def test_adam_zero_gradient_is_noop():
    theta = np.array([1.0, -2.0])
    new, m, v = adam_step(theta, np.zeros(2), np.zeros(2), np.zeros(2), 1)
    np.testing.assert_array_equal(new, theta)


def test_adam_first_step_has_lr_magnitude():
    theta = np.zeros(3)
    g = np.array([0.5, -3.0, 1e-3])
    new, _, _ = adam_step(theta, g, np.zeros(3), np.zeros(3), 1, lr=0.01)
    np.testing.assert_allclose(new, -0.01 * g / (np.abs(g) + 1e-8), rtol=1e-12)


def test_adam_three_steps_on_square():
    # hand-run recurrence for f(w) = w^2 from w = 1
    w, m, v = 1.0, 0.0, 0.0
    for t in (1, 2, 3):
        g = 2 * w
        m = 0.9 * m + 0.1 * g
        v = 0.999 * v + 0.001 * g * g
        w -= 0.001 * (m / (1 - 0.9**t)) / (math.sqrt(v / (1 - 0.999**t)) + 1e-8)
    theta, mm, vv = np.array([1.0]), np.zeros(1), np.zeros(1)
    for t in (1, 2, 3):
        theta, mm, vv = adam_step(theta, 2 * theta, mm, vv, t)
    assert theta[0] == pytest.approx(w, abs=1e-15)
    assert w == pytest.approx(0.997, abs=1e-6)
    opt = Adam(1)
    th = np.array([1.0])
    for _ in range(3):
        opt.step(th, 2 * th)
    assert th[0] == pytest.approx(w, abs=1e-15)


# ---------------------------------------------------------------------------
# initialisation and counting


def test_init_orthogonal_xavier_zero_bias():
    p = init_params(50, [50, 50], 1, seed=4)
    for layer in p.layers:
        for g in range(4):
            Q = layer.Wh[g * 50 : (g + 1) * 50]
            assert np.max(np.abs(Q.T @ Q - np.eye(50))) <= 1e-10
        assert np.all(np.abs(layer.Wx) <= math.sqrt(6 / 100))
        assert not np.any(layer.bx) and not np.any(layer.bh)
    assert math.sqrt(6 / 100) == pytest.approx(0.24495, abs=1e-5)
    assert not np.any(p.head_b)


def test_init_is_deterministic():
    a = init_params(3, [5, 4], 2, "softmax", seed=11)
    b = init_params(3, [5, 4], 2, "softmax", seed=11)
    c = init_params(3, [5, 4], 2, "softmax", seed=12)
    assert np.array_equal(a.theta, b.theta)
    assert not np.array_equal(a.theta, c.theta)


@pytest.mark.parametrize(
    "d, hidden, out, expected",
    [(1, [50, 50], 1, 31051), (9, [50, 50], 9, 33059), (1, [2], 1, 43)],
)
def test_parameter_count(d, hidden, out, expected):
    p = LstmStackParams(d, hidden, out, "softmax" if out > 1 else "linear")
    assert parameter_count(p) == expected
    formula = 0
    d_in = d
    for n in hidden:
        formula += 4 * ((d_in + n) * n + 2 * n)
        d_in = n
    assert formula + out * d_in + out == expected


def test_checkpoint_roundtrip(tmp_path, rng):
    p = random_params(rng, 3, [4, 2], 3, "softmax")
    path = tmp_path / "model.npz"
    p.save(path)
    q = LstmStackParams.load(path)
    assert q.config() == p.config()
    np.testing.assert_array_equal(q.theta, p.theta)
