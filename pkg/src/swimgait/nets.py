"""Dense networks with hand-written reverse-mode gradients, plus Adam.

Plain numpy throughout: the networks are tiny (two hidden layers of 64)
and the gradients are simple enough that an autodiff dependency would be
heavier than the math. Every gradient is validated against central
finite differences in the tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ShapeMismatch",
    "MLPParams",
    "MLPGrads",
    "init_mlp",
    "mlp_forward",
    "mlp_backward",
    "GaussianPolicy",
    "Adam",
    "global_grad_norm",
    "clip_grad_norm_",
    "flatten_arrays",
    "unflatten_arrays",
]

LOG_STD_MIN = -10.0
LOG_STD_MAX = 2.0
_LOG_2PI = math.log(2.0 * math.pi)


class ShapeMismatch(ValueError):
    pass


@dataclass
class MLPParams:
    """Affine-ReLU chain with a linear output layer."""

    weights: list[np.ndarray]  # each (fan_in, fan_out)
    biases: list[np.ndarray]

    @property
    def sizes(self) -> tuple[int, ...]:
        return (self.weights[0].shape[0], *(w.shape[1] for w in self.weights))

    def arrays(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out

    def copy(self) -> "MLPParams":
        return MLPParams([w.copy() for w in self.weights], [b.copy() for b in self.biases])


@dataclass
class MLPGrads:
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def arrays(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out


def init_mlp(sizes, rng: np.random.Generator, out_scale: float | None = None) -> MLPParams:
    """He-style init for the rectifier layers. The linear output layer
    defaults to a 1/sqrt(fan_in) scale; pass a small ``out_scale`` to
    start the map near zero."""
    weights, biases = [], []
    last = len(sizes) - 2
    for i, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        if i == last:
            scale = math.sqrt(1.0 / fan_in) if out_scale is None else out_scale
        else:
            scale = math.sqrt(2.0 / fan_in)
        weights.append(scale * rng.standard_normal((fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MLPParams(weights, biases)


def mlp_forward(params: MLPParams, x: np.ndarray):
    """Forward pass; accepts a single vector or a (batch, dim) array.

    Returns ``(output, cache)``; the cache holds the layer inputs needed
    by :func:`mlp_backward`.
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    h = x[None, :] if single else x
    if h.shape[1] != params.weights[0].shape[0]:
        raise ShapeMismatch(
            f"input dim {h.shape[1]} != first layer {params.weights[0].shape[0]}"
        )
    inputs = []
    last = len(params.weights) - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        inputs.append(h)
        h = h @ w + b
        if i != last:
            h = np.maximum(h, 0.0)  # subgradient at 0 taken as 0
    out = h[0] if single else h
    return out, (inputs, single)


def mlp_backward(params: MLPParams, cache, grad_out: np.ndarray):
    """Exact gradients of the forward map.

    ``grad_out`` has the output's shape; returns ``(MLPGrads, grad_in)``.
    """
    inputs, single = cache
    g = np.asarray(grad_out, dtype=float)
    if single:
        g = g[None, :]
    if g.shape[1] != params.weights[-1].shape[1]:
        raise ShapeMismatch(
            f"grad dim {g.shape[1]} != output dim {params.weights[-1].shape[1]}"
        )
    gw = [None] * len(params.weights)
    gb = [None] * len(params.biases)
    for i in range(len(params.weights) - 1, -1, -1):
        x_in = inputs[i]
        if i != len(params.weights) - 1:
            # undo the rectifier: its output is the next layer's input
            g = g * (inputs[i + 1] > 0.0)
        gw[i] = x_in.T @ g
        gb[i] = g.sum(axis=0)
        g = g @ params.weights[i].T
    grad_in = g[0] if single else g
    return MLPGrads(gw, gb), grad_in


@dataclass
class GaussianPolicy:
    """Diagonal Gaussian over actions: MLP mean, state-independent
    log-std (clamped to [-10, 2])."""

    net: MLPParams
    log_std: np.ndarray

    def __post_init__(self):
        self.log_std = np.clip(np.asarray(self.log_std, dtype=float), LOG_STD_MIN, LOG_STD_MAX)

    @property
    def act_dim(self) -> int:
        return self.log_std.shape[0]

    def mean(self, obs: np.ndarray) -> np.ndarray:
        out, _ = mlp_forward(self.net, obs)
        return out

    def sample(self, obs: np.ndarray, rng: np.random.Generator):
        """Draw one action; returns ``(action, log_prob)``."""
        mu = self.mean(obs)
        std = np.exp(self.log_std)
        z = rng.standard_normal(self.act_dim)
        action = mu + std * z
        logp = -0.5 * float(z @ z) - float(self.log_std.sum()) - 0.5 * self.act_dim * _LOG_2PI
        return action, logp

    def log_prob(self, obs: np.ndarray, actions: np.ndarray) -> np.ndarray:
        """Batched log-density of given actions."""
        mu, _ = mlp_forward(self.net, obs)
        z = (actions - mu) / np.exp(self.log_std)
        return (
            -0.5 * (z * z).sum(axis=-1)
            - self.log_std.sum()
            - 0.5 * self.act_dim * _LOG_2PI
        )

    def entropy(self) -> float:
        return float(self.log_std.sum() + 0.5 * self.act_dim * (1.0 + _LOG_2PI))

    def clamp_log_std(self) -> None:
        np.clip(self.log_std, LOG_STD_MIN, LOG_STD_MAX, out=self.log_std)


class Adam:
    """Adam over a list of parameter arrays, updated in place."""

    def __init__(self, params: list[np.ndarray], lr: float, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, grads: list[np.ndarray]) -> None:
        if len(grads) != len(self.params):
            raise ShapeMismatch("gradient list does not match parameter list")
        self.t += 1
        b1c = 1.0 - self.beta1**self.t
        b2c = 1.0 - self.beta2**self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / b1c) / (np.sqrt(v / b2c) + self.eps)

    def state_dict(self) -> dict:
        return {
            "t": self.t,
            "m": [a.tolist() for a in self.m],
            "v": [a.tolist() for a in self.v],
        }

    def load_state_dict(self, state: dict) -> None:
        self.t = int(state["t"])
        for dst, src in zip(self.m, state["m"]):
            dst[...] = np.asarray(src, dtype=float).reshape(dst.shape)
        for dst, src in zip(self.v, state["v"]):
            dst[...] = np.asarray(src, dtype=float).reshape(dst.shape)


def global_grad_norm(grads: list[np.ndarray]) -> float:
    return math.sqrt(math.fsum(float((g * g).sum()) for g in grads))


def clip_grad_norm_(grads: list[np.ndarray], max_norm: float) -> float:
    """Scale the gradient list in place to a global L2 norm of at most
    ``max_norm``; returns the pre-clip norm."""
    norm = global_grad_norm(grads)
    if max_norm > 0 and norm > max_norm:
        scale = max_norm / norm
        for g in grads:
            g *= scale
    return norm


def flatten_arrays(arrays: list[np.ndarray]) -> np.ndarray:
    return np.concatenate([a.ravel() for a in arrays])


def unflatten_arrays(vec: np.ndarray, templates: list[np.ndarray]) -> list[np.ndarray]:
    if vec.size != sum(t.size for t in templates):
        raise ShapeMismatch("vector length does not match templates")
    out, k = [], 0
    for t in templates:
        out.append(vec[k : k + t.size].reshape(t.shape).copy())
        k += t.size
    return out
