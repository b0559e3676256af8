import math

import numpy as np
import pytest

from swimgait.nets import Adam, GaussianPolicy, flatten_arrays, init_mlp, mlp_forward
from swimgait.ppo import (
    LengthMismatch,
    NonFiniteLoss,
    PPOConfig,
    PPOTrainer,
    RolloutBuffer,
    gae,
    ppo_loss_and_grads,
    ppo_update,
)


def brute_force_gae(rewards, values, dones, gamma, lam, last_value):
    """O(T^2) double sum, truncating every product chain at episode ends."""
    n = len(rewards)
    deltas = []
    for t in range(n):
        nv = last_value if t == n - 1 else values[t + 1]
        deltas.append(rewards[t] + gamma * nv * (0.0 if dones[t] else 1.0) - values[t])
    adv = np.zeros(n)
    for t in range(n):
        total, weight = 0.0, 1.0
        for k in range(t, n):
            if k > t:
                if dones[k - 1]:
                    break
                weight *= gamma * lam
            total += weight * deltas[k]
        adv[t] = total
    return adv


def test_gae_lambda_zero_is_one_step_td(rng):
    r, v = rng.uniform(-1, 1, 20), rng.uniform(-1, 1, 20)
    dones = np.zeros(20, bool)
    dones[7] = True
    adv, ret = gae(r, v, dones, 0.9, 0.0, last_value=0.3)
    for t in range(20):
        nv = 0.3 if t == 19 else v[t + 1]
        expected = r[t] + 0.9 * nv * (0.0 if dones[t] else 1.0) - v[t]
        assert adv[t] == pytest.approx(expected, abs=1e-12)
    assert np.allclose(ret, adv + v)


def test_gae_reward_to_go_case(rng):
    # gamma=1, lambda=1, V=0: advantage is the undiscounted reward-to-go
    r = rng.uniform(-1, 1, 15)
    adv, _ = gae(r, np.zeros(15), np.zeros(15, bool), 1.0, 1.0, last_value=0.0)
    tail = np.cumsum(r[::-1])[::-1]
    assert np.allclose(adv, tail, atol=1e-12)


def test_gae_matches_brute_force(rng):
    for _ in range(10):
        n = 50
        r, v = rng.uniform(-1, 1, n), rng.uniform(-1, 1, n)
        dones = rng.uniform(0, 1, n) < 0.1
        lv = rng.uniform(-1, 1)
        adv, ret = gae(r, v, dones, 0.97, 0.9, lv)
        ref = brute_force_gae(r, v, dones, 0.97, 0.9, lv)
        assert np.abs(adv - ref).max() < 1e-12
        assert np.abs(ret - (ref + v)).max() < 1e-12


def test_gae_length_mismatch():
    with pytest.raises(LengthMismatch):
        gae(np.zeros(5), np.zeros(4), np.zeros(5, bool), 0.99, 0.95, 0.0)


def _make_batch(rng, n=8, obs_dim=4, act_dim=2):
    policy = GaussianPolicy(init_mlp((obs_dim, 8, act_dim), rng), np.array([-0.4, -0.6]))
    value = init_mlp((obs_dim, 8, 1), rng)
    obs = rng.uniform(-1, 1, (n, obs_dim))
    actions = rng.uniform(-1, 1, (n, act_dim))
    old_logp = np.asarray(policy.log_prob(obs, actions))
    adv = rng.uniform(-1, 1, n)
    rets = rng.uniform(-1, 1, n)
    return policy, value, obs, actions, old_logp, adv, rets


def test_ppo_objective_ratio_one_is_mean_advantage(rng):
    # before any update the ratio is exactly 1: clip inactive, objective
    # per sample equals the advantage
    policy, value, obs, actions, old_logp, adv, rets = _make_batch(rng)
    losses, _ = ppo_loss_and_grads(
        policy, value, obs, actions, old_logp, adv, rets, 0.2, 0.5, 0.0
    )
    assert losses["policy_loss"] == pytest.approx(-adv.mean(), abs=1e-12)


def test_ppo_objective_clipped_branch(rng):
    # ratio 1.5 with positive advantage and eps=0.2 clips to 1.2 * adv
    policy, value, obs, actions, old_logp, adv, rets = _make_batch(rng)
    adv = np.abs(adv) + 0.1
    shifted = old_logp - math.log(1.5)  # makes ratio exactly 1.5
    losses, _ = ppo_loss_and_grads(
        policy, value, obs, actions, shifted, adv, rets, 0.2, 0.5, 0.0
    )
    assert losses["policy_loss"] == pytest.approx(-(1.2 * adv).mean(), rel=1e-12)


def test_value_loss_is_mean_squared_error(rng):
    policy, value, obs, actions, old_logp, adv, rets = _make_batch(rng)
    losses, _ = ppo_loss_and_grads(
        policy, value, obs, actions, old_logp, adv, rets, 0.2, 0.5, 0.0
    )
    v, _ = mlp_forward(value, obs)
    assert losses["value_loss"] == pytest.approx(((v[:, 0] - rets) ** 2).mean(), rel=1e-12)


def test_ppo_loss_gradients_match_fd():
    # full-parameter central differences on a small synthetic buffer
    rng = np.random.default_rng(5)
    policy, value, obs, actions, old_logp, adv, rets = _make_batch(rng, n=4)
    clip_eps, vc, ec = 0.2, 0.5, 0.01

    def arrays():
        return [*policy.net.arrays(), policy.log_std, *value.arrays()]

    def loss_of_current():
        losses, _ = ppo_loss_and_grads(
            policy, value, obs, actions, old_logp, adv, rets, clip_eps, vc, ec
        )
        return losses["total"]

    losses, grads = ppo_loss_and_grads(
        policy, value, obs, actions, old_logp, adv, rets, clip_eps, vc, ec
    )

    # FD differentiation needs margin from relu/clip kinks
    mu, _ = mlp_forward(policy.net, obs)
    ratio = np.exp(np.asarray(policy.log_prob(obs, actions)) - old_logp)
    assert np.abs(ratio - (1 + clip_eps)).min() > 1e-3
    assert np.abs(ratio - (1 - clip_eps)).min() > 1e-3

    step = 1e-5
    worst = 0.0
    for arr, grad in zip(arrays(), grads):
        flat, gflat = arr.ravel(), grad.ravel()
        for idx in range(flat.size):
            keep = flat[idx]
            flat[idx] = keep + step
            fp = loss_of_current()
            flat[idx] = keep - step
            fm = loss_of_current()
            flat[idx] = keep
            fd = (fp - fm) / (2 * step)
            denom = max(abs(fd), abs(gflat[idx]), 1e-6)
            worst = max(worst, abs(fd - gflat[idx]) / denom)
    assert worst < 1e-4


def test_buffer_capacity_and_clear():
    buf = RolloutBuffer(3, 2, 1)
    for i in range(3):
        buf.add(np.zeros(2), np.zeros(1), 0.0, float(i), 0.0, False)
    assert buf.full
    with pytest.raises(IndexError):
        buf.add(np.zeros(2), np.zeros(1), 0.0, 0.0, 0.0, False)
    buf.clear()
    assert not buf.full and buf.ptr == 0


def test_ppo_update_requires_full_buffer(rng):
    policy = GaussianPolicy(init_mlp((2, 8, 1), rng), np.array([-0.5]))
    value = init_mlp((2, 8, 1), rng)
    cfg = PPOConfig(steps_per_update=8, minibatch_size=4)
    buf = RolloutBuffer(8, 2, 1)
    opt = Adam([*policy.net.arrays(), policy.log_std, *value.arrays()], cfg.learning_rate)
    with pytest.raises(ValueError):
        ppo_update(buf, policy, value, cfg, opt, rng, 0.0)


def test_ppo_update_nonfinite_loss_aborts(rng):
    policy = GaussianPolicy(init_mlp((2, 8, 1), rng), np.array([-0.5]))
    value = init_mlp((2, 8, 1), rng)
    cfg = PPOConfig(steps_per_update=8, minibatch_size=8)
    buf = RolloutBuffer(8, 2, 1)
    for i in range(8):
        buf.add(rng.uniform(-1, 1, 2), rng.uniform(-1, 1, 1), 0.0, math.inf, 0.0, False)
    opt = Adam([*policy.net.arrays(), policy.log_std, *value.arrays()], cfg.learning_rate)
    with np.errstate(invalid="ignore"):  # inf rewards propagate by design
        with pytest.raises(NonFiniteLoss):
            ppo_update(buf, policy, value, cfg, opt, rng, 0.0)


def test_config_validation():
    with pytest.raises(ValueError):
        PPOConfig(gamma=0.0)
    with pytest.raises(ValueError):
        PPOConfig(gae_lambda=1.5)
    with pytest.raises(ValueError):
        PPOConfig(clip_epsilon=0.0)


def test_trainer_deterministic_given_seed():
    from _pointmass import PointMassEnv

    def run(seed):
        rng = np.random.default_rng(seed)
        policy = GaussianPolicy(init_mlp((1, 16, 1), rng), np.array([math.log(0.1)]))
        value = init_mlp((1, 16, 1), rng)
        cfg = PPOConfig(steps_per_update=128, minibatch_size=32, epochs_per_update=2)
        trainer = PPOTrainer(PointMassEnv(seed), policy, value, cfg, rng)
        trainer.run(total_steps=512)
        return flatten_arrays(trainer.trainable_arrays())

    a, b = run(7), run(7)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, run(8))
