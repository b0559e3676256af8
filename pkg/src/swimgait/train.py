"""Baseline-guided policy search on the swimmer environment.

The learned network outputs a residual joint-velocity command; the
executed action is the hand-tuned baseline plus the residual clamped to
a per-component range delta. Shrinking delta confines the search to the
baseline's neighborhood; delta = 0 degenerates to the baseline exactly,
and ``use_baseline=False`` with a full-range delta recovers plain
from-scratch policy optimization.

Run artifacts (all under one output directory):

* ``curve.csv``   - ``env_steps,mean_episode_reward,policy_loss,value_loss,entropy``
* ``evals.csv``   - periodic deterministic evaluations
* ``ckpt_latest.json`` / ``ckpt_final.json`` - full training state
  (schema_version 1), enough for exact resume
* ``result.json`` - final/best evaluation summary
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from . import _kernels
from .env import (
    Action,
    EnvConfig,
    SwimmerEnv,
    baseline_policy,
    observation,
    rollout,
)
from .ioutil import atomic_write_json, atomic_write_text
from .models import HighReParams, LowReParams
from .nets import GaussianPolicy, MLPParams, init_mlp, mlp_forward
from .ppo import PPOConfig, PPOTrainer

__all__ = [
    "BGPSConfig",
    "CheckpointSchemaMismatch",
    "compose_action",
    "ResidualSwimmerEnv",
    "build_policy_value",
    "train",
    "TrainResult",
    "evaluate_policy",
    "EvalResult",
    "save_checkpoint",
    "load_checkpoint",
    "policy_from_checkpoint",
    "configs_from_checkpoint",
    "baseline_reward",
    "config_digest",
    "run_cached",
]

CHECKPOINT_SCHEMA = 1


class CheckpointSchemaMismatch(ValueError):
    pass


@dataclass(frozen=True)
class BGPSConfig:
    """Residual composition settings: per-component action range delta
    (rad/s) and whether the baseline is added at all."""

    action_range: float = 0.15
    use_baseline: bool = True

    def __post_init__(self):
        if self.action_range < 0:
            raise ValueError("action_range must be nonnegative")


def compose_action(baseline: Action, residual, delta: float) -> Action:
    """Executed action: baseline plus the residual clamped to [-delta,
    +delta] per component (the environment applies its own speed clamp
    on top)."""
    r1 = min(max(float(residual[0]), -delta), delta)
    r2 = min(max(float(residual[1]), -delta), delta)
    return Action(baseline.adot1 + r1, baseline.adot2 + r2)


class ResidualSwimmerEnv:
    """Trainer-facing adapter: the action is the raw residual; the
    baseline is composed in before stepping the swimmer."""

    act_dim = 2

    def __init__(self, env_config: EnvConfig, bgps: BGPSConfig):
        self.env = SwimmerEnv(env_config)
        self.bgps = bgps
        self.obs_dim = env_config.obs_dim

    def reset(self) -> np.ndarray:
        return self.env.reset()

    def step(self, residual: np.ndarray):
        base = (
            baseline_policy(self.env.state)
            if self.bgps.use_baseline
            else Action(0.0, 0.0)
        )
        act = compose_action(base, residual, self.bgps.action_range)
        # executed command must stay within the advertised range
        assert abs(act.adot1 - base.adot1) <= self.bgps.action_range + 1e-12
        assert abs(act.adot2 - base.adot2) <= self.bgps.action_range + 1e-12
        return self.env.step(act)


def build_policy_value(
    obs_dim: int, act_dim: int, bgps: BGPSConfig, rng: np.random.Generator
) -> tuple[GaussianPolicy, MLPParams]:
    """Two hidden layers of 64 with rectifiers and linear heads. The
    policy output layer starts at 1e-3 scale (residual ~ 0, so training
    begins at the baseline); exploration noise is half the action range."""
    net = init_mlp((obs_dim, 64, 64, act_dim), rng, out_scale=1e-3)
    init_std = max(0.5 * bgps.action_range, 1e-8)
    policy = GaussianPolicy(net, np.full(act_dim, math.log(init_std)))
    # value also starts near zero: the reward scale is small, and large
    # random initial values would swamp the first advantage estimates
    value = init_mlp((obs_dim, 64, 64, 1), rng, out_scale=1e-3)
    return policy, value


def deterministic_policy(
    policy: GaussianPolicy, env_cfg: EnvConfig, bgps: BGPSConfig
) -> Callable:
    """Mean-action policy (no sampling) over environment states."""

    def act(state) -> Action:
        residual = policy.mean(observation(state, env_cfg))
        base = baseline_policy(state) if bgps.use_baseline else Action(0.0, 0.0)
        return compose_action(base, residual, bgps.action_range)

    return act


def baseline_reward(env_cfg: EnvConfig) -> float:
    """Episode reward of the pure hand-tuned gait (the no-learning row
    of the comparison table)."""
    return rollout(baseline_policy, env_cfg).total_reward


# -- config (de)serialization ------------------------------------------------

def _env_cfg_to_dict(cfg: EnvConfig) -> dict:
    return asdict(cfg)


def _env_cfg_from_dict(d: dict) -> EnvConfig:
    d = dict(d)
    d["low_re"] = LowReParams(**d["low_re"])
    d["high_re"] = HighReParams(**d["high_re"])
    return EnvConfig(**d)


def _mlp_to_dict(p: MLPParams) -> dict:
    return {
        "layers": [
            {"w": w.tolist(), "b": b.tolist()} for w, b in zip(p.weights, p.biases)
        ]
    }


def _mlp_from_dict(d: dict) -> MLPParams:
    return MLPParams(
        weights=[np.asarray(layer["w"], dtype=float) for layer in d["layers"]],
        biases=[np.asarray(layer["b"], dtype=float) for layer in d["layers"]],
    )


def save_checkpoint(path, trainer: PPOTrainer, env_cfg: EnvConfig, bgps: BGPSConfig) -> None:
    env = trainer.env.env  # the underlying SwimmerEnv
    ck = {
        "schema_version": CHECKPOINT_SCHEMA,
        "config": {
            "env": _env_cfg_to_dict(env_cfg),
            "bgps": asdict(bgps),
            "ppo": asdict(trainer.cfg),
        },
        "policy": _mlp_to_dict(trainer.policy.net),
        "value": _mlp_to_dict(trainer.value_net),
        "log_std": trainer.policy.log_std.tolist(),
        "rng_state": trainer.rng.bit_generator.state,
        "env_steps": trainer.env_steps,
        "env_state": asdict(env.state),
        "trainer_state": {
            "episode_return": trainer.episode_return,
            "episode_steps": trainer.episode_steps,
            "last_mean_return": trainer._last_mean_return,
        },
        "optimizer": trainer.optimizer.state_dict(),
    }
    atomic_write_json(path, ck)


def load_checkpoint(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        ck = json.load(fh)
    if ck.get("schema_version") != CHECKPOINT_SCHEMA:
        raise CheckpointSchemaMismatch(
            f"checkpoint schema {ck.get('schema_version')!r} != {CHECKPOINT_SCHEMA}"
        )
    return ck


def policy_from_checkpoint(ck: dict) -> GaussianPolicy:
    return GaussianPolicy(_mlp_from_dict(ck["policy"]), np.asarray(ck["log_std"], dtype=float))


def configs_from_checkpoint(ck: dict) -> tuple[EnvConfig, BGPSConfig, PPOConfig]:
    c = ck["config"]
    return (
        _env_cfg_from_dict(c["env"]),
        BGPSConfig(**c["bgps"]),
        PPOConfig(**c["ppo"]),
    )


def _restore_trainer(trainer: PPOTrainer, ck: dict) -> None:
    policy = policy_from_checkpoint(ck)
    for dst, src in zip(trainer.policy.net.arrays(), policy.net.arrays()):
        dst[...] = src
    trainer.policy.log_std[...] = policy.log_std
    value = _mlp_from_dict(ck["value"])
    for dst, src in zip(trainer.value_net.arrays(), value.arrays()):
        dst[...] = src
    trainer.optimizer.load_state_dict(ck["optimizer"])
    trainer.rng.bit_generator.state = ck["rng_state"]
    trainer.env_steps = int(ck["env_steps"])
    from .env import EnvState

    st = ck["env_state"]
    trainer.env.env.state = EnvState(**st)
    trainer.obs = observation(trainer.env.env.state, trainer.env.env.config)
    ts = ck["trainer_state"]
    trainer.episode_return = float(ts["episode_return"])
    trainer.episode_steps = int(ts["episode_steps"])
    trainer._last_mean_return = float(ts["last_mean_return"])


# -- training loop -----------------------------------------------------------

@dataclass
class TrainResult:
    out_dir: str
    env_steps: int
    final_eval: float
    best_eval: float
    baseline: float
    curve_path: str
    checkpoint_path: str


def _truncate_csv(path: Path, max_steps: int) -> None:
    """Drop rows past a resume point so resumed runs byte-match
    uninterrupted ones."""
    if not path.exists():
        return
    lines = path.read_text(encoding="utf-8").splitlines()
    kept = [lines[0]]
    for line in lines[1:]:
        if line and int(line.split(",", 1)[0]) <= max_steps:
            kept.append(line)
    atomic_write_text(path, "\n".join(kept) + "\n")


def _append(path: Path, line: str) -> None:
    with open(path, "a", encoding="utf-8") as fh:
        fh.write(line + "\n")


def train(
    env_cfg: EnvConfig,
    bgps: BGPSConfig,
    ppo: PPOConfig,
    out_dir,
    *,
    eval_every: int = 10240,
    resume: bool = False,
    log: Optional[Callable[[str], None]] = None,
) -> TrainResult:
    """Run BGPS to ``ppo.total_steps`` environment steps.

    Fully reproducible from the seed; ``resume=True`` continues from
    ``ckpt_latest.json`` with identical results to an uninterrupted run.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    curve = out / "curve.csv"
    evals = out / "evals.csv"
    latest = out / "ckpt_latest.json"

    env = ResidualSwimmerEnv(env_cfg, bgps)
    rng = np.random.default_rng(ppo.seed)
    policy, value = build_policy_value(env.obs_dim, env.act_dim, bgps, rng)
    trainer = PPOTrainer(env, policy, value, ppo, rng)

    if resume and latest.exists():
        ck = load_checkpoint(latest)
        ck_env, ck_bgps, ck_ppo = configs_from_checkpoint(ck)
        if (ck_env, ck_bgps) != (env_cfg, bgps):
            raise CheckpointSchemaMismatch(
                "checkpoint was produced by a different env/bgps config"
            )
        _restore_trainer(trainer, ck)
        _truncate_csv(curve, trainer.env_steps)
        _truncate_csv(evals, trainer.env_steps)
    else:
        atomic_write_text(curve, "env_steps,mean_episode_reward,policy_loss,value_loss,entropy\n")
        atomic_write_text(evals, "env_steps,eval_reward,dx,dtheta\n")

    best = -math.inf
    if evals.exists():
        for line in evals.read_text(encoding="utf-8").splitlines()[1:]:
            if line:
                best = max(best, float(line.split(",")[1]))

    def run_eval() -> tuple[float, float, float]:
        res = rollout(deterministic_policy(trainer.policy, env_cfg, bgps), env_cfg)
        return res.total_reward, res.dx, res.dtheta

    next_eval = (trainer.env_steps // eval_every + 1) * eval_every
    while trainer.env_steps < ppo.total_steps:
        stats, mean_ret = trainer.update_once()
        _append(
            curve,
            f"{trainer.env_steps},{mean_ret:.17g},{stats.policy_loss:.17g},"
            f"{stats.value_loss:.17g},{stats.entropy:.17g}",
        )
        if trainer.env_steps >= next_eval or trainer.env_steps >= ppo.total_steps:
            reward, dx, dth = run_eval()
            best = max(best, reward)
            _append(evals, f"{trainer.env_steps},{reward:.17g},{dx:.17g},{dth:.17g}")
            save_checkpoint(latest, trainer, env_cfg, bgps)
            if log is not None:
                log(
                    f"steps {trainer.env_steps}: eval {reward:.6g} "
                    f"(mean episode {mean_ret:.6g})"
                )
            next_eval = (trainer.env_steps // eval_every + 1) * eval_every

    final_eval, dx, dth = run_eval()
    best = max(best, final_eval)
    save_checkpoint(latest, trainer, env_cfg, bgps)
    save_checkpoint(out / "ckpt_final.json", trainer, env_cfg, bgps)
    base = baseline_reward(env_cfg)
    result = {
        "env_steps": trainer.env_steps,
        "final_eval": final_eval,
        "best_eval": best,
        "final_dx": dx,
        "final_dtheta": dth,
        "baseline_reward": base,
        "backend": _kernels.BACKEND,
    }
    atomic_write_json(out / "result.json", result)
    return TrainResult(
        out_dir=str(out),
        env_steps=trainer.env_steps,
        final_eval=final_eval,
        best_eval=best,
        baseline=base,
        curve_path=str(curve),
        checkpoint_path=str(out / "ckpt_final.json"),
    )


@dataclass
class EvalResult:
    mean_reward: float
    episodes: list[dict]


def evaluate_policy(
    checkpoint_path,
    env_cfg: Optional[EnvConfig] = None,
    bgps: Optional[BGPSConfig] = None,
    episodes: int = 1,
) -> EvalResult:
    """Deterministic evaluation of a checkpoint (mean action, no
    sampling). Env and composition settings default to the ones stored
    in the checkpoint."""
    ck = load_checkpoint(checkpoint_path)
    ck_env, ck_bgps, _ = configs_from_checkpoint(ck)
    env_cfg = env_cfg if env_cfg is not None else ck_env
    bgps = bgps if bgps is not None else ck_bgps
    policy = policy_from_checkpoint(ck)
    act = deterministic_policy(policy, env_cfg, bgps)
    eps = []
    for _ in range(episodes):
        res = rollout(act, env_cfg)
        eps.append({"reward": res.total_reward, "dx": res.dx, "dtheta": res.dtheta})
    return EvalResult(
        mean_reward=float(np.mean([e["reward"] for e in eps])), episodes=eps
    )


# -- cached runs (comparison tables, acceptance sweeps) ----------------------

def config_digest(env_cfg: EnvConfig, bgps: BGPSConfig, ppo: PPOConfig,
                  eval_every: int = 10240) -> str:
    """Stable hash of everything a run's outputs depend on, including
    the kernel backend."""
    blob = json.dumps(
        {
            "env": _env_cfg_to_dict(env_cfg),
            "bgps": asdict(bgps),
            "ppo": asdict(ppo),
            "eval_every": eval_every,
            "backend": _kernels.BACKEND,
            # bump when trainer semantics change, so stale cached runs
            # can never satisfy a sweep
            "trainer_protocol": 2,
        },
        sort_keys=True,
    )
    return hashlib.sha256(blob.encode()).hexdigest()


def run_cached(
    env_cfg: EnvConfig,
    bgps: BGPSConfig,
    ppo: PPOConfig,
    cache_root,
    *,
    eval_every: int = 10240,
    log: Optional[Callable[[str], None]] = None,
) -> dict:
    """Train (or reuse) one configuration under a content-addressed run
    directory; partial runs resume. Returns the ``result.json`` payload
    plus the run directory."""
    digest = config_digest(env_cfg, bgps, ppo, eval_every)
    run_dir = Path(cache_root) / digest[:16]
    result_path = run_dir / "result.json"
    if result_path.exists():
        with open(result_path, "r", encoding="utf-8") as fh:
            result = json.load(fh)
        if result.get("env_steps", 0) >= ppo.total_steps:
            result["run_dir"] = str(run_dir)
            result["cached"] = True
            return result
    tr = train(env_cfg, bgps, ppo, run_dir, eval_every=eval_every, resume=True, log=log)
    with open(result_path, "r", encoding="utf-8") as fh:
        result = json.load(fh)
    result["run_dir"] = tr.out_dir
    result["cached"] = False
    return result


def run_cached_job(args: tuple) -> dict:
    """Picklable wrapper for process pools."""
    env_cfg, bgps, ppo, cache_root = args
    return run_cached(env_cfg, bgps, ppo, cache_root)
