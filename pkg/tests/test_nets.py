import math

import numpy as np
import pytest

from swimgait.nets import (
    Adam,
    GaussianPolicy,
    MLPParams,
    ShapeMismatch,
    clip_grad_norm_,
    flatten_arrays,
    global_grad_norm,
    init_mlp,
    mlp_backward,
    mlp_forward,
    unflatten_arrays,
)


def test_zero_weights_pass_bias_through(rng):
    params = MLPParams(
        weights=[np.zeros((4, 3)), np.zeros((3, 2))],
        biases=[np.array([1.0, 2.0, 3.0]), np.array([-1.0, 0.5])],
    )
    out, _ = mlp_forward(params, rng.uniform(-5, 5, 4))
    assert np.allclose(out, [-1.0, 0.5])  # hidden = relu(b1), out = b2 + 0


def test_single_linear_layer_identity():
    params = MLPParams(weights=[np.eye(3)], biases=[np.zeros(3)])
    x = np.array([0.3, -0.7, 2.0])
    out, _ = mlp_forward(params, x)
    assert np.allclose(out, x)


def test_forward_shape_mismatch():
    params = init_mlp((4, 8, 2), np.random.default_rng(0))
    with pytest.raises(ShapeMismatch):
        mlp_forward(params, np.zeros(5))


def test_forward_batched_matches_single(rng):
    params = init_mlp((5, 16, 16, 2), rng)
    xs = rng.uniform(-1, 1, (7, 5))
    batch, _ = mlp_forward(params, xs)
    for i in range(7):
        single, _ = mlp_forward(params, xs[i])
        assert np.allclose(batch[i], single, atol=1e-14)


def test_directional_derivative_matches_fd(rng):
    params = init_mlp((5, 16, 16, 2), rng)
    x = rng.uniform(-1, 1, 5)
    direction = rng.uniform(-1, 1, 5)
    out, cache = mlp_forward(params, x)
    g = rng.uniform(-1, 1, 2)
    _, grad_in = mlp_backward(params, cache, g)
    step = 1e-6
    fp, _ = mlp_forward(params, x + step * direction)
    fm, _ = mlp_forward(params, x - step * direction)
    fd = (g @ (fp - fm)) / (2 * step)
    assert abs(float(grad_in @ direction) - fd) < 1e-6 * max(1.0, abs(fd))


def test_linear_layer_weight_gradient_is_outer_product(rng):
    params = MLPParams(weights=[rng.uniform(-1, 1, (3, 2))], biases=[np.zeros(2)])
    x = rng.uniform(-1, 1, 3)
    gout = rng.uniform(-1, 1, 2)
    _, cache = mlp_forward(params, x)
    grads, _ = mlp_backward(params, cache, gout)
    assert np.allclose(grads.weights[0], np.outer(x, gout), atol=1e-14)
    assert np.allclose(grads.biases[0], gout)


def test_zero_output_gradient_gives_zero_param_gradients(rng):
    params = init_mlp((4, 8, 3), rng)
    _, cache = mlp_forward(params, rng.uniform(-1, 1, 4))
    grads, gin = mlp_backward(params, cache, np.zeros(3))
    assert all(np.all(g == 0) for g in grads.arrays())
    assert np.all(gin == 0)


def test_all_parameter_gradients_match_fd(rng):
    # scalar loss = v . f(x); central differences at h=1e-5 per parameter
    params = init_mlp((4, 8, 8, 2), rng)
    x = rng.uniform(-1, 1, 4)
    v = rng.uniform(-1, 1, 2)
    _, cache = mlp_forward(params, x)
    grads, _ = mlp_backward(params, cache, v)

    arrays = params.arrays()
    garrays = grads.arrays()
    step = 1e-5
    worst = 0.0
    for arr, grad in zip(arrays, garrays):
        flat = arr.ravel()
        gflat = grad.ravel()
        for idx in range(flat.size):
            keep = flat[idx]
            flat[idx] = keep + step
            fp, _ = mlp_forward(params, x)
            flat[idx] = keep - step
            fm, _ = mlp_forward(params, x)
            flat[idx] = keep
            fd = float(v @ (fp - fm)) / (2 * step)
            denom = max(abs(fd), abs(gflat[idx]), 1e-6)
            worst = max(worst, abs(fd - gflat[idx]) / denom)
    assert worst < 1e-4


def test_backward_shape_mismatch(rng):
    params = init_mlp((4, 8, 2), rng)
    _, cache = mlp_forward(params, rng.uniform(-1, 1, 4))
    with pytest.raises(ShapeMismatch):
        mlp_backward(params, cache, np.zeros(3))


def test_policy_log_prob_at_mean():
    rng = np.random.default_rng(3)
    policy = GaussianPolicy(init_mlp((4, 8, 2), rng), np.array([-0.5, 0.25]))
    obs = rng.uniform(-1, 1, 4)
    mu = policy.mean(obs)
    logp = policy.log_prob(obs, mu)
    expected = -policy.log_std.sum() - math.log(2 * math.pi)
    assert logp == pytest.approx(expected, abs=1e-12)


def test_policy_nearly_deterministic_at_log_std_floor(rng):
    policy = GaussianPolicy(init_mlp((4, 8, 2), rng), np.full(2, -10.0))
    obs = rng.uniform(-1, 1, 4)
    action, _ = policy.sample(obs, rng)
    assert np.abs(action - policy.mean(obs)).max() < 1e-3


def test_policy_sample_statistics():
    rng = np.random.default_rng(11)
    policy = GaussianPolicy(init_mlp((3, 8, 2), rng), np.array([-1.0, -0.3]))
    obs = rng.uniform(-1, 1, 3)
    mu = policy.mean(obs)
    std = np.exp(policy.log_std)
    n = 100_000
    draws = np.empty((n, 2))
    for i in range(n):
        draws[i], _ = policy.sample(obs, rng)
    se_mean = std / math.sqrt(n)
    assert np.all(np.abs(draws.mean(axis=0) - mu) < 3 * se_mean)
    se_std = std / math.sqrt(2 * (n - 1))
    assert np.all(np.abs(draws.std(axis=0, ddof=1) - std) < 3 * se_std)


def test_policy_sample_logp_consistent_with_density(rng):
    policy = GaussianPolicy(init_mlp((3, 8, 2), rng), np.array([-0.7, 0.1]))
    obs = rng.uniform(-1, 1, 3)
    action, logp = policy.sample(obs, rng)
    assert logp == pytest.approx(float(policy.log_prob(obs, action)), abs=1e-12)


def test_log_std_clamped():
    policy = GaussianPolicy(init_mlp((3, 8, 2), np.random.default_rng(0)), np.array([-99.0, 99.0]))
    assert policy.log_std[0] == -10.0
    assert policy.log_std[1] == 2.0


def test_policy_entropy_formula():
    policy = GaussianPolicy(init_mlp((3, 8, 2), np.random.default_rng(0)), np.array([-1.0, 0.5]))
    expected = (-1.0 + 0.5) + 1.0 * (1 + math.log(2 * math.pi))
    assert policy.entropy() == pytest.approx(expected)


def test_adam_first_step_magnitude():
    # with fresh moments, the first step is lr * sign(g) up to eps
    p = [np.array([1.0, -2.0])]
    opt = Adam(p, lr=0.01)
    opt.step([np.array([0.3, -0.7])])
    assert np.allclose(p[0], [1.0 - 0.01, -2.0 + 0.01], atol=1e-6)


def test_adam_converges_on_quadratic():
    p = [np.array([5.0, -3.0])]
    opt = Adam(p, lr=0.1)
    for _ in range(500):
        opt.step([2.0 * p[0]])
    assert np.abs(p[0]).max() < 1e-3


def test_adam_state_roundtrip():
    p = [np.array([1.0, 2.0]), np.array([[3.0]])]
    opt = Adam(p, lr=0.01)
    opt.step([np.array([0.1, -0.1]), np.array([[0.2]])])
    state = opt.state_dict()
    # a restored optimizer resumes from the checkpointed parameters
    p2 = [a.copy() for a in p]
    opt2 = Adam(p2, lr=0.01)
    opt2.load_state_dict(state)
    g = [np.array([0.05, 0.05]), np.array([[-0.1]])]
    opt.step(g)
    opt2.step(g)
    assert np.allclose(opt.params[0], opt2.params[0], atol=0)
    assert opt.t == opt2.t


def test_grad_clip_global_norm():
    g = [np.array([3.0, 4.0]), np.array([0.0])]
    norm = clip_grad_norm_(g, 2.5)
    assert norm == pytest.approx(5.0)
    assert global_grad_norm(g) == pytest.approx(2.5)
    g2 = [np.array([0.3, 0.4])]
    norm2 = clip_grad_norm_(g2, 2.5)
    assert norm2 == pytest.approx(0.5)
    assert np.allclose(g2[0], [0.3, 0.4])  # under the cap: untouched


def test_flatten_roundtrip(rng):
    arrays = [rng.uniform(-1, 1, (3, 4)), rng.uniform(-1, 1, 5)]
    vec = flatten_arrays(arrays)
    back = unflatten_arrays(vec, arrays)
    assert all(np.array_equal(a, b) for a, b in zip(arrays, back))
    with pytest.raises(ShapeMismatch):
        unflatten_arrays(vec[:-1], arrays)
