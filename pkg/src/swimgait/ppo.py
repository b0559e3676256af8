"""Clipped-surrogate policy optimization with generalized advantage
estimation, written against a minimal environment protocol.

The environment must provide ``reset() -> obs`` and
``step(action) -> (obs, reward, done)`` plus ``obs_dim`` / ``act_dim``;
episodes restart automatically on ``done``. The trainer is
single-threaded and fully deterministic given its seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .nets import (
    Adam,
    GaussianPolicy,
    MLPParams,
    clip_grad_norm_,
    mlp_backward,
    mlp_forward,
)

__all__ = [
    "PPOConfig",
    "RolloutBuffer",
    "LengthMismatch",
    "NonFiniteLoss",
    "gae",
    "ppo_loss_and_grads",
    "ppo_update",
    "PPOTrainer",
    "UpdateStats",
]


class LengthMismatch(ValueError):
    pass


class NonFiniteLoss(RuntimeError):
    """A loss went non-finite; the run aborts with diagnostics."""


@dataclass(frozen=True)
class PPOConfig:
    clip_epsilon: float = 0.2
    gamma: float = 0.99
    gae_lambda: float = 0.95
    learning_rate: float = 3e-4
    epochs_per_update: int = 10
    minibatch_size: int = 64
    steps_per_update: int = 2048
    total_steps: int = 300_000
    value_coef: float = 0.5
    entropy_coef: float = 0.0
    max_grad_norm: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.gamma <= 1:
            raise ValueError("gamma must lie in (0, 1]")
        if not 0 <= self.gae_lambda <= 1:
            raise ValueError("gae_lambda must lie in [0, 1]")
        if self.clip_epsilon <= 0:
            raise ValueError("clip_epsilon must be positive")


class RolloutBuffer:
    """Fixed-capacity on-policy storage; cleared after each update."""

    def __init__(self, capacity: int, obs_dim: int, act_dim: int):
        self.capacity = capacity
        self.obs = np.zeros((capacity, obs_dim))
        self.actions = np.zeros((capacity, act_dim))
        self.log_probs = np.zeros(capacity)
        self.rewards = np.zeros(capacity)
        self.values = np.zeros(capacity)
        self.dones = np.zeros(capacity, dtype=bool)
        self.ptr = 0

    def add(self, obs, action, log_prob, reward, value, done) -> None:
        i = self.ptr
        if i >= self.capacity:
            raise IndexError("rollout buffer full")
        self.obs[i] = obs
        self.actions[i] = action
        self.log_probs[i] = log_prob
        self.rewards[i] = reward
        self.values[i] = value
        self.dones[i] = done
        self.ptr = i + 1

    @property
    def full(self) -> bool:
        return self.ptr == self.capacity

    def clear(self) -> None:
        self.ptr = 0


def gae(rewards, values, dones, gamma: float, lam: float, last_value: float):
    """Exponentially weighted advantages and returns.

    ``delta_t = r_t + gamma * V_{t+1} * (1 - done_t) - V_t`` accumulated
    backward with factor ``gamma * lam``, truncating at episode ends;
    ``last_value`` bootstraps the state after the final transition.
    Returns ``(advantages, returns)`` with ``returns = adv + values``.
    """
    rewards = np.asarray(rewards, dtype=float)
    values = np.asarray(values, dtype=float)
    dones = np.asarray(dones, dtype=bool)
    n = len(rewards)
    if len(values) != n or len(dones) != n:
        raise LengthMismatch(
            f"rewards/values/dones lengths differ: {n}/{len(values)}/{len(dones)}"
        )
    adv = np.zeros(n)
    running = 0.0
    for t in range(n - 1, -1, -1):
        nonterminal = 0.0 if dones[t] else 1.0
        next_v = last_value if t == n - 1 else values[t + 1]
        delta = rewards[t] + gamma * next_v * nonterminal - values[t]
        running = delta + gamma * lam * nonterminal * running
        adv[t] = running
    return adv, adv + values


def ppo_loss_and_grads(
    policy: GaussianPolicy,
    value_net: MLPParams,
    obs: np.ndarray,
    actions: np.ndarray,
    old_log_probs: np.ndarray,
    advantages: np.ndarray,
    returns: np.ndarray,
    clip_epsilon: float,
    value_coef: float,
    entropy_coef: float,
):
    """Total loss and exact gradients on one minibatch.

    Loss = -mean(min(ratio * adv, clip(ratio) * adv))
           + value_coef * mean((V - returns)^2) - entropy_coef * H.
    Gradients are ordered: policy weights/biases, log_std, value
    weights/biases (matching ``trainable_arrays`` in the trainer).
    """
    b = len(obs)
    mu, cache_p = mlp_forward(policy.net, obs)
    std = np.exp(policy.log_std)
    z = (actions - mu) / std
    log_probs = -0.5 * (z * z).sum(axis=1) - policy.log_std.sum() - policy.act_dim * 0.5 * math.log(2 * math.pi)
    ratio = np.exp(log_probs - old_log_probs)
    unclipped = ratio * advantages
    clipped = np.clip(ratio, 1.0 - clip_epsilon, 1.0 + clip_epsilon) * advantages
    policy_loss = -float(np.minimum(unclipped, clipped).mean())

    # gradient flows through the ratio only where the unclipped branch
    # attains the min (ties included: there the branches coincide)
    active = unclipped <= clipped
    dlogp = -(advantages * ratio * active) / b
    dmu = dlogp[:, None] * (z / std)
    grads_p, _ = mlp_backward(policy.net, cache_p, dmu)
    dlog_std = (dlogp[:, None] * (z * z - 1.0)).sum(axis=0) - entropy_coef * np.ones(
        policy.act_dim
    )

    v, cache_v = mlp_forward(value_net, obs)
    verr = v[:, 0] - returns
    value_loss = float((verr * verr).mean())
    grads_v, _ = mlp_backward(value_net, cache_v, (2.0 * value_coef / b) * verr[:, None])

    entropy = policy.entropy()
    total = policy_loss + value_coef * value_loss - entropy_coef * entropy
    grads = [*grads_p.arrays(), dlog_std, *grads_v.arrays()]
    losses = {
        "total": total,
        "policy_loss": policy_loss,
        "value_loss": value_loss,
        "entropy": entropy,
    }
    return losses, grads


@dataclass
class UpdateStats:
    policy_loss: float
    value_loss: float
    entropy: float
    grad_norm: float


def ppo_update(
    buffer: RolloutBuffer,
    policy: GaussianPolicy,
    value_net: MLPParams,
    cfg: PPOConfig,
    optimizer: Adam,
    rng: np.random.Generator,
    last_value: float,
) -> UpdateStats:
    """One optimization phase over a full buffer.

    Advantages are normalized across the buffer; minibatches are
    reshuffled each epoch from ``rng``; gradients are clipped in global
    L2 norm. Deterministic given the generator state.
    """
    if not buffer.full:
        raise ValueError("ppo_update requires a full rollout buffer")
    adv, rets = gae(
        buffer.rewards, buffer.values, buffer.dones, cfg.gamma, cfg.gae_lambda, last_value
    )
    adv = (adv - adv.mean()) / (adv.std() + 1e-8)

    n = buffer.capacity
    sums = {"policy_loss": 0.0, "value_loss": 0.0, "entropy": 0.0, "grad_norm": 0.0}
    batches = 0
    for _ in range(cfg.epochs_per_update):
        order = rng.permutation(n)
        for start in range(0, n, cfg.minibatch_size):
            idx = order[start : start + cfg.minibatch_size]
            losses, grads = ppo_loss_and_grads(
                policy,
                value_net,
                buffer.obs[idx],
                buffer.actions[idx],
                buffer.log_probs[idx],
                adv[idx],
                rets[idx],
                cfg.clip_epsilon,
                cfg.value_coef,
                cfg.entropy_coef,
            )
            if not math.isfinite(losses["total"]):
                raise NonFiniteLoss(
                    f"non-finite loss {losses} at optimizer step {optimizer.t}"
                )
            norm = clip_grad_norm_(grads, cfg.max_grad_norm)
            optimizer.step(grads)
            policy.clamp_log_std()
            for key in ("policy_loss", "value_loss", "entropy"):
                sums[key] += losses[key]
            sums["grad_norm"] += norm
            batches += 1
    return UpdateStats(
        policy_loss=sums["policy_loss"] / batches,
        value_loss=sums["value_loss"] / batches,
        entropy=sums["entropy"] / batches,
        grad_norm=sums["grad_norm"] / batches,
    )


class PPOTrainer:
    """Alternates rollout collection and clipped-surrogate updates."""

    def __init__(self, environment, policy: GaussianPolicy, value_net: MLPParams,
                 cfg: PPOConfig, rng: Optional[np.random.Generator] = None):
        self.env = environment
        self.policy = policy
        self.value_net = value_net
        self.cfg = cfg
        self.rng = rng if rng is not None else np.random.default_rng(cfg.seed)
        self.buffer = RolloutBuffer(cfg.steps_per_update, environment.obs_dim, environment.act_dim)
        self.optimizer = Adam(self.trainable_arrays(), cfg.learning_rate)
        self.env_steps = 0
        self.obs = self.env.reset()
        self.episode_return = 0.0
        self.episode_steps = 0
        self.completed_returns: list[float] = []
        self._last_mean_return = 0.0

    def trainable_arrays(self) -> list[np.ndarray]:
        return [*self.policy.net.arrays(), self.policy.log_std, *self.value_net.arrays()]

    def collect(self) -> float:
        """Fill the buffer; returns the bootstrap value of the state
        left at the buffer boundary.

        Episode ends are fixed-horizon truncations of a continuing
        cyclic task, not absorbing states, so the successor's value is
        folded into the final reward (partial-episode bootstrapping).
        Without it the value function would need the time-to-truncation,
        which the cyclic observation deliberately hides.
        """
        self.buffer.clear()
        while not self.buffer.full:
            action, logp = self.policy.sample(self.obs, self.rng)
            value, _ = mlp_forward(self.value_net, self.obs)
            nobs, reward, done = self.env.step(action)
            gae_reward = reward
            if done:
                boot, _ = mlp_forward(self.value_net, nobs)
                gae_reward = reward + self.cfg.gamma * float(boot[0])
            self.buffer.add(self.obs, action, logp, gae_reward, float(value[0]), done)
            self.episode_return += reward
            self.episode_steps += 1
            self.env_steps += 1
            if done:
                self.completed_returns.append(self.episode_return)
                self.episode_return = 0.0
                self.episode_steps = 0
                nobs = self.env.reset()
            self.obs = nobs
        value, _ = mlp_forward(self.value_net, self.obs)
        return float(value[0])

    def update_once(self) -> tuple[UpdateStats, float]:
        """One collect-and-optimize cycle; returns the update stats and
        the mean return of episodes completed during collection."""
        last_value = self.collect()
        stats = ppo_update(
            self.buffer, self.policy, self.value_net, self.cfg, self.optimizer,
            self.rng, last_value,
        )
        if self.completed_returns:
            self._last_mean_return = float(np.mean(self.completed_returns))
            self.completed_returns.clear()
        return stats, self._last_mean_return

    def run(self, total_steps: Optional[int] = None,
            on_update: Optional[Callable[["PPOTrainer", UpdateStats, float], None]] = None) -> None:
        target = self.cfg.total_steps if total_steps is None else total_steps
        while self.env_steps < target:
            stats, mean_ret = self.update_once()
            if on_update is not None:
                on_update(self, stats, mean_ret)
