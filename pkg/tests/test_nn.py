import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gradcheck import max_relative_error
from ou_diffuse.nn import (
    ACTIVATIONS,
    Gradients,
    MlpParams,
    OptimizerConfig,
    OptimizerState,
    default_layer_dims,
    init_params,
    mlp_backward,
    mlp_forward,
    optimizer_step,
)


def random_batch(p, m, seed):
    r = np.random.default_rng(seed)
    d = p.out_dim
    return r.standard_normal((m, d)), r.uniform(0, 1, m), r.standard_normal((m, d))


def test_init_deterministic_and_zero_bias():
    a, b = init_params((3, 16, 2), 4), init_params((3, 16, 2), 4)
    assert all(np.array_equal(u, v) for u, v in zip(a.arrays(), b.arrays()))
    assert all(np.all(bias == 0) for bias in a.biases)
    c = init_params((3, 16, 2), 5)
    assert not np.array_equal(a.weights[0], c.weights[0])


def test_init_variance():
    w = init_params((256, 256), 0).weights[0]
    assert abs(w.var() * 256 - 1) < 0.2
    assert abs(w.mean()) < 5 / 256 / 16


@pytest.mark.parametrize("dims", [(1,), (3, 0, 2), ()])
def test_init_rejects_bad_dims(dims):
    with pytest.raises(ValueError):
        init_params(dims, 0)


def test_default_dims():
    assert default_layer_dims(2) == (3, 128, 128, 128, 2)
    assert default_layer_dims(30, width=64, depth=2) == (31, 64, 64, 30)


def test_zero_params_give_zero_output():
    p = init_params((4, 8, 8, 3), 0)
    z = MlpParams(p.layer_dims, [0 * w for w in p.weights], [0 * b for b in p.biases])
    assert np.array_equal(mlp_forward(z, np.ones((5, 3)), 0.3), np.zeros((5, 3)))


def test_single_affine_layer_passes_input_slice():
    w = np.vstack([np.eye(2), np.zeros((1, 2))])
    p = MlpParams((3, 2), [w], [np.zeros(2)])
    x = np.array([[1.5, -2.0], [0.0, 7.0]])
    assert np.array_equal(mlp_forward(p, x, 0.9), x)
    assert np.array_equal(mlp_forward(p, x[0], 0.1), x[0])


def test_time_is_an_input():
    p = init_params((3, 32, 32, 2), 2)
    x = np.array([0.4, -0.3])
    a, b = mlp_forward(p, x, 0.2), mlp_forward(p, x, 0.2 + 1e-4)
    assert np.max(np.abs(a - b)) > 0


def test_forward_rejects_non_finite_and_bad_shape():
    p = init_params((3, 8, 2), 0)
    with pytest.raises(ValueError):
        mlp_forward(p, [np.nan, 0.0], 0.5)
    with pytest.raises(ValueError):
        mlp_forward(p, [0.0, 0.0], np.inf)
    with pytest.raises(ValueError):
        mlp_forward(p, [0.0, 0.0, 0.0], 0.5)


def test_perfect_prediction_zero_loss():
    p = init_params((3, 8, 2), 0)
    x, t, _ = random_batch(p, 10, 0)
    loss, g = mlp_backward(p, x, t, mlp_forward(p, x, t))
    assert loss == 0.0
    assert all(np.all(a == 0) for a in g.arrays())


def test_loss_is_mean_squared_norm():
    p = init_params((3, 8, 2), 1)
    x, t, y = random_batch(p, 7, 1)
    loss, _ = mlp_backward(p, x, t, y)
    ref = np.mean(np.sum((y - mlp_forward(p, x, t)) ** 2, axis=1))
    assert loss == pytest.approx(ref, rel=1e-14)


def test_duplicated_batch_same_loss_and_grads():
    p = init_params((3, 16, 2), 3)
    x, t, y = random_batch(p, 9, 2)
    l1, g1 = mlp_backward(p, x, t, y)
    l2, g2 = mlp_backward(p, np.vstack([x, x]), np.concatenate([t, t]), np.vstack([y, y]))
    assert l2 == pytest.approx(l1, rel=1e-14)
    np.testing.assert_allclose(g2.flat(), g1.flat(), rtol=1e-12, atol=1e-16)


def test_empty_batch_rejected():
    p = init_params((3, 8, 2), 0)
    with pytest.raises(ValueError):
        mlp_backward(p, np.zeros((0, 2)), np.zeros(0), np.zeros((0, 2)))


@pytest.mark.parametrize("activation", ACTIVATIONS)
@pytest.mark.parametrize("dims", [(2, 1), (3, 5, 2), (4, 7, 6, 3), (2, 4, 4, 4, 1)])
def test_gradient_matches_finite_differences(activation, dims):
    p = init_params(dims, 7, activation)
    # non-zero biases so every path of the graph is exercised
    p = p.with_flat(p.flat() + 0.1 * np.random.default_rng(1).standard_normal(p.n_params()))
    x, t, y = random_batch(p, 6, 3)
    assert max_relative_error(p, x, t, y) < 1e-5


@settings(max_examples=15, deadline=None)
@given(st.lists(st.integers(1, 6), min_size=0, max_size=3), st.integers(1, 3),
       st.sampled_from(ACTIVATIONS), st.integers(0, 2**31), st.integers(1, 8))
def test_gradient_check_sweep(hidden, d, activation, seed, m):
    p = init_params((d + 1, *hidden, d), seed, activation)
    x, t, y = random_batch(p, m, seed)
    assert max_relative_error(p, x, t, y) < 1e-5


@pytest.mark.parametrize("activation", ACTIVATIONS)
def test_weighted_gradient_matches_finite_differences(activation):
    p = init_params((3, 6, 5, 2), 4, activation)
    x, t, y = random_batch(p, 8, 4)
    w = np.random.default_rng(4).uniform(0, 2, 8)
    assert max_relative_error(p, x, t, y, w) < 1e-5


def test_row_weights_scale_the_loss():
    p = init_params((3, 6, 2), 0)
    x, t, y = random_batch(p, 5, 0)
    plain, g1 = mlp_backward(p, x, t, y)
    weighted, g2 = mlp_backward(p, x, t, y, np.full(5, 3.0))
    assert weighted == pytest.approx(3 * plain, rel=1e-14)
    np.testing.assert_allclose(g2.flat(), 3 * g1.flat(), rtol=1e-13)
    with pytest.raises(ValueError):
        mlp_backward(p, x, t, y, np.ones(4))
    with pytest.raises(ValueError):
        mlp_backward(p, x, t, y, -np.ones(5))


def test_activation_is_stable_for_large_inputs():
    p = init_params((2, 4, 1), 0, "silu")
    p = p.with_flat(p.flat() * 1e3)
    out = mlp_forward(p, [800.0], 0.5)
    assert np.all(np.isfinite(out))


def test_sgd_update_rule():
    p = MlpParams((1, 1), [np.array([[2.0]])], [np.array([0.5])])
    g = Gradients([np.array([[4.0]])], [np.array([-1.0])])
    new, _ = optimizer_step(p, g, OptimizerState(), OptimizerConfig("sgd", 0.1))
    assert new.weights[0][0, 0] == pytest.approx(2.0 - 0.4)
    assert new.biases[0][0] == pytest.approx(0.6)
    assert p.weights[0][0, 0] == 2.0  # input untouched


def test_zero_gradient_leaves_params():
    p = init_params((3, 4, 2), 0)
    zero = Gradients([0 * w for w in p.weights], [0 * b for b in p.biases])
    for kind in ("sgd", "adam"):
        new, _ = optimizer_step(p, zero, OptimizerState(), OptimizerConfig(kind))
        assert np.array_equal(new.flat(), p.flat())


def test_optimizer_rejects():
    p = init_params((3, 4, 2), 0)
    bad = Gradients([np.full_like(w, np.nan) for w in p.weights], [0 * b for b in p.biases])
    with pytest.raises(FloatingPointError):
        optimizer_step(p, bad, OptimizerState(), OptimizerConfig())
    wrong = Gradients([np.zeros((2, 2))], [np.zeros(2)])
    with pytest.raises(ValueError):
        optimizer_step(p, wrong, OptimizerState(), OptimizerConfig())
    with pytest.raises(ValueError):
        OptimizerConfig("rmsprop")
    with pytest.raises(ValueError):
        OptimizerConfig(learning_rate=0.0)


@pytest.mark.parametrize("kind,lr,shrink", [("sgd", 0.1, 0.01), ("adam", 0.005, 0.9)])
def test_quadratic_decreases_monotonically(kind, lr, shrink):
    # f(theta) = ||theta||^2 with the parameters packed into a one-layer net
    r = np.random.default_rng(0)
    p = MlpParams((3, 2), [r.standard_normal((3, 2))], [r.standard_normal(2)])
    state, cfg = OptimizerState(), OptimizerConfig(kind, lr)
    losses = []
    for _ in range(100):
        theta = p.flat()
        losses.append(float(theta @ theta))
        flat_grad = 2 * theta
        g = Gradients([flat_grad[:6].reshape(3, 2)], [flat_grad[6:]])
        p, state = optimizer_step(p, g, state, cfg)
    assert all(b < a for a, b in zip(losses, losses[1:]))
    assert losses[-1] < shrink * losses[0]


def fit(p, x, t, y, steps, cfg):
    state = OptimizerState()
    for _ in range(steps):
        _, g = mlp_backward(p, x, t, y)
        p, state = optimizer_step(p, g, state, cfg)
    return p


def test_interleaved_training_matches_separate():
    pa, pb = init_params((3, 8, 2), 1), init_params((3, 8, 2), 2)
    xa, ta, ya = random_batch(pa, 16, 5)
    xb, tb, yb = random_batch(pb, 16, 6)
    cfg = OptimizerConfig()
    sep_a, sep_b = fit(pa, xa, ta, ya, 20, cfg), fit(pb, xb, tb, yb, 20, cfg)
    sa, sb = OptimizerState(), OptimizerState()
    for _ in range(20):
        _, g = mlp_backward(pa, xa, ta, ya)
        pa, sa = optimizer_step(pa, g, sa, cfg)
        _, g = mlp_backward(pb, xb, tb, yb)
        pb, sb = optimizer_step(pb, g, sb, cfg)
    assert np.array_equal(pa.flat(), sep_a.flat())
    assert np.array_equal(pb.flat(), sep_b.flat())


def test_flat_roundtrip_and_copy():
    p = init_params((3, 5, 2), 0)
    q = p.with_flat(p.flat())
    assert np.array_equal(q.flat(), p.flat())
    c = p.copy()
    c.weights[0][0, 0] += 1
    assert c.weights[0][0, 0] != p.weights[0][0, 0]
    with pytest.raises(ValueError):
        p.with_flat(np.zeros(3))
