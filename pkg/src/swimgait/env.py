"""Gait environment for the three-link swimmers.

State is ``(alpha1, alpha2, theta, t)`` plus a hidden world position
``(x, y)`` used only for rewards; actions are joint velocities held
constant over one step of length ``dt``. Dynamics are kinematic:
``xi = -A(alpha) adot`` integrated jointly with the shape by RK4, with
joints clamping at the limit (a saturated joint's rate is zeroed for
the rest of the step).

Rewards: ``distance`` pays the world-frame x gained per step; ``energy``
subtracts ``beta * |adot| * dt`` (the dt factor makes the penalty a time
integral; ``legacy_energy`` drops it for the literal per-step form).

Everything is a pure function; ``SwimmerEnv`` is a thin stateful wrapper
for sequential rollouts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Callable, Optional

import numpy as np

from . import _kernels
from .fields import JointLoop
from .ioutil import atomic_write_text
from .models import HighReParams, LowReParams, SwimmerModel, make_model

__all__ = [
    "JointWave",
    "GaitWaveform",
    "BASELINE_WAVEFORM",
    "EnvConfig",
    "EnvState",
    "Action",
    "Transition",
    "NonFiniteState",
    "env_reset",
    "env_step",
    "baseline_policy",
    "observation",
    "rollout",
    "RolloutResult",
    "write_rollout_csv",
    "evaluate_gait",
    "SwimmerEnv",
]


class NonFiniteState(RuntimeError):
    """Integration produced non-finite values (parameter misuse)."""


@dataclass(frozen=True)
class JointWave:
    """Single-frequency profile ``offset + amplitude*cos(omega*t - phase)``."""

    amplitude: float
    omega: float = 1.0
    phase: float = 0.0
    offset: float = 0.0

    def __post_init__(self):
        if self.amplitude < 0:
            raise ValueError("amplitude must be nonnegative")
        if self.omega <= 0:
            raise ValueError("angular frequency must be positive")

    def angle(self, t):
        return self.offset + self.amplitude * np.cos(self.omega * t - self.phase)

    def rate(self, t):
        return -self.amplitude * self.omega * np.sin(self.omega * t - self.phase)


@dataclass(frozen=True)
class GaitWaveform:
    """Sinusoidal two-joint gait; equal frequencies so the joint-space
    trajectory closes after one period."""

    joint1: JointWave
    joint2: JointWave

    def __post_init__(self):
        if self.joint1.omega != self.joint2.omega:
            raise ValueError("joint frequencies must match for a closed gait")

    @property
    def period(self) -> float:
        return 2.0 * math.pi / self.joint1.omega

    def angles(self, t):
        return self.joint1.angle(t), self.joint2.angle(t)

    def rates(self, t):
        return self.joint1.rate(t), self.joint2.rate(t)

    def reversed(self) -> "GaitWaveform":
        """Time-reversed gait: traces the same joint-space loop the
        other way around."""
        return GaitWaveform(
            replace(self.joint1, phase=-self.joint1.phase),
            replace(self.joint2, phase=-self.joint2.phase),
        )

    def joint_loop(self, segments: int = 256) -> JointLoop:
        t = np.linspace(0.0, self.period, segments + 1)
        a1, a2 = self.angles(t)
        verts = np.stack([a1, a2], axis=-1)
        verts[-1] = verts[0]
        return JointLoop(verts)


# hand-tuned gait: 0.6 rad on both joints, joint 2 lagging by 1 rad
BASELINE_WAVEFORM = GaitWaveform(JointWave(0.6, 1.0, 0.0), JointWave(0.6, 1.0, 1.0))


@dataclass(frozen=True)
class EnvConfig:
    swimmer: str = "low_re"
    low_re: LowReParams = field(default_factory=LowReParams)
    high_re: HighReParams = field(default_factory=HighReParams)
    dt: float = 0.04
    episode_steps: int = 500
    reward_mode: str = "distance"
    beta: float = 0.1
    legacy_energy: bool = False
    joint_limit: float = 3.0
    max_joint_speed: float = 1.5
    reset_mode: str = "baseline_t0"
    time_features: bool = True

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.episode_steps < 1:
            raise ValueError("episode_steps must be at least 1")
        if self.beta < 0:
            raise ValueError("beta must be nonnegative")
        if self.joint_limit <= 0 or self.max_joint_speed <= 0:
            raise ValueError("joint_limit and max_joint_speed must be positive")
        if self.swimmer not in ("low_re", "high_re"):
            raise ValueError(f"unknown swimmer {self.swimmer!r}")
        if self.reward_mode not in ("distance", "energy"):
            raise ValueError(f"unknown reward_mode {self.reward_mode!r}")
        if self.reset_mode not in ("baseline_t0", "zero"):
            raise ValueError(f"unknown reset_mode {self.reset_mode!r}")

    def model(self) -> SwimmerModel:
        params = self.low_re if self.swimmer == "low_re" else self.high_re
        return _cached_model(self.swimmer, params)

    @property
    def obs_dim(self) -> int:
        return 5 if self.time_features else 4


@lru_cache(maxsize=32)
def _cached_model(kind, params) -> SwimmerModel:
    return make_model(kind, params)


@dataclass(frozen=True)
class EnvState:
    alpha1: float
    alpha2: float
    theta: float
    t: float
    x: float = 0.0
    y: float = 0.0
    step: int = 0


@dataclass(frozen=True)
class Action:
    adot1: float
    adot2: float


@dataclass(frozen=True)
class Transition:
    state: EnvState
    action: Action  # as executed, i.e. after the speed clamp
    reward: float
    next_state: EnvState
    done: bool


def env_reset(config: EnvConfig) -> EnvState:
    """Deterministic reset: origin pose, t = 0; shape either zero or on
    the baseline gait's t=0 point so the hand-tuned gait starts smooth."""
    if config.reset_mode == "zero":
        a1, a2 = 0.0, 0.0
    else:
        a1, a2 = (float(v) for v in BASELINE_WAVEFORM.angles(0.0))
    return EnvState(alpha1=a1, alpha2=a2, theta=0.0, t=0.0)


def env_step(state: EnvState, action: Action, config: EnvConfig) -> Transition:
    sp = config.max_joint_speed
    u1 = min(max(action.adot1, -sp), sp)
    u2 = min(max(action.adot2, -sp), sp)
    model = config.model()
    x, y, th, a1, a2 = _kernels.env_step(
        state.x,
        state.y,
        state.theta,
        state.alpha1,
        state.alpha2,
        u1,
        u2,
        config.dt,
        config.joint_limit,
        *model.kernel_args,
    )
    if not (
        math.isfinite(x) and math.isfinite(y) and math.isfinite(th)
        and math.isfinite(a1) and math.isfinite(a2)
    ):
        raise NonFiniteState(
            f"non-finite state after step {state.step} of {config.swimmer} env"
        )
    nstep = state.step + 1
    nxt = EnvState(alpha1=a1, alpha2=a2, theta=th, t=nstep * config.dt, x=x, y=y, step=nstep)
    reward = x - state.x
    if config.reward_mode == "energy":
        scale = 1.0 if config.legacy_energy else config.dt
        reward -= config.beta * math.hypot(u1, u2) * scale
    return Transition(
        state=state,
        action=Action(u1, u2),
        reward=reward,
        next_state=nxt,
        done=nstep >= config.episode_steps,
    )


def baseline_policy(state: EnvState) -> Action:
    """Joint velocities realizing the hand-tuned sinusoidal gait; a pure
    function of time."""
    r1, r2 = BASELINE_WAVEFORM.rates(state.t)
    return Action(float(r1), float(r2))


def observation(state: EnvState, config: EnvConfig) -> np.ndarray:
    """Observation vector; world position stays hidden. Time enters as
    (sin t, cos t) by default since unbounded inputs are hostile to
    small MLPs; ``time_features=False`` exposes raw t instead."""
    if config.time_features:
        return np.array(
            [state.alpha1, state.alpha2, state.theta, math.sin(state.t), math.cos(state.t)]
        )
    return np.array([state.alpha1, state.alpha2, state.theta, state.t])


@dataclass
class RolloutResult:
    transitions: list[Transition]
    total_reward: float
    dx: float
    dy: float
    dtheta: float
    mean_abs_rate: float

    @property
    def initial_state(self) -> EnvState:
        return self.transitions[0].state

    @property
    def final_state(self) -> EnvState:
        return self.transitions[-1].next_state


def rollout(
    policy: Callable[[EnvState], Action],
    config: EnvConfig,
    steps: Optional[int] = None,
) -> RolloutResult:
    """Run one episode (or ``steps`` transitions) from reset."""
    n = config.episode_steps if steps is None else steps
    state = env_reset(config)
    transitions = []
    for _ in range(n):
        tr = env_step(state, policy(state), config)
        transitions.append(tr)
        state = tr.next_state
    first, last = transitions[0].state, state
    rates = [math.hypot(tr.action.adot1, tr.action.adot2) for tr in transitions]
    return RolloutResult(
        transitions=transitions,
        total_reward=math.fsum(tr.reward for tr in transitions),
        dx=last.x - first.x,
        dy=last.y - first.y,
        dtheta=last.theta - first.theta,
        mean_abs_rate=math.fsum(rates) / len(rates),
    )


def write_rollout_csv(result: RolloutResult, path) -> None:
    """Trajectory CSV: a step-0 row with the reset state, then one row
    per transition carrying the post-step state, the executed action and
    the reward."""
    s0 = result.initial_state
    lines = ["step,t,alpha1,alpha2,theta,x,y,u1,u2,reward"]
    lines.append(
        f"0,{s0.t:.17g},{s0.alpha1:.17g},{s0.alpha2:.17g},{s0.theta:.17g},"
        f"{s0.x:.17g},{s0.y:.17g},0,0,0"
    )
    for tr in result.transitions:
        s = tr.next_state
        lines.append(
            f"{s.step},{s.t:.17g},{s.alpha1:.17g},{s.alpha2:.17g},{s.theta:.17g},"
            f"{s.x:.17g},{s.y:.17g},{tr.action.adot1:.17g},{tr.action.adot2:.17g},"
            f"{tr.reward:.17g}"
        )
    atomic_write_text(path, "\n".join(lines) + "\n")


def evaluate_gait(
    waveform: GaitWaveform,
    model: SwimmerModel,
    cycles: int = 1,
    steps_per_cycle: int = 1024,
) -> tuple[float, float, float]:
    """Average per-cycle displacement ``(dx, dy, dtheta)`` of the exact
    waveform, integrated with fine RK4 (the continuous gait, not the
    discretized environment)."""
    if cycles < 1:
        raise ValueError("cycles must be at least 1")
    n = cycles * steps_per_cycle
    hstep = waveform.period / steps_per_cycle
    stage_t = np.arange(2 * n + 1) * (hstep / 2.0)
    a1, a2 = waveform.angles(stage_t)
    u1, u2 = waveform.rates(stage_t)
    amat = model.connection_batch(np.asarray(a1), np.asarray(a2))
    xis = -np.einsum("nij,nj->ni", amat, np.stack([u1, u2], axis=-1))

    # stage sums grouped symmetrically and theta reported through fsum so
    # that time-reversing the gait negates the rotation bit-exactly
    x = y = th = 0.0
    theta_terms = []
    for i in range(n):
        xi0, xim, xi1 = xis[2 * i], xis[2 * i + 1], xis[2 * i + 2]

        def stage(ang, xi):
            c, s = math.cos(ang), math.sin(ang)
            return (c * xi[0] - s * xi[1], s * xi[0] + c * xi[1], xi[2])

        k1 = stage(th, xi0)
        k2 = stage(th + 0.5 * hstep * k1[2], xim)
        k3 = stage(th + 0.5 * hstep * k2[2], xim)
        k4 = stage(th + hstep * k3[2], xi1)
        x += hstep / 6.0 * ((k1[0] + k4[0]) + 2.0 * (k2[0] + k3[0]))
        y += hstep / 6.0 * ((k1[1] + k4[1]) + 2.0 * (k2[1] + k3[1]))
        dth = hstep / 6.0 * ((k1[2] + k4[2]) + 2.0 * (k2[2] + k3[2]))
        theta_terms.append(dth)
        th += dth
    return x / cycles, y / cycles, math.fsum(theta_terms) / cycles


class SwimmerEnv:
    """Stateful wrapper over the pure transition function."""

    def __init__(self, config: EnvConfig):
        self.config = config
        self.state = env_reset(config)

    @property
    def obs_dim(self) -> int:
        return self.config.obs_dim

    act_dim = 2

    def reset(self) -> np.ndarray:
        self.state = env_reset(self.config)
        return observation(self.state, self.config)

    def step(self, action: Action) -> tuple[np.ndarray, float, bool]:
        tr = env_step(self.state, action, self.config)
        self.state = tr.next_state
        return observation(tr.next_state, self.config), tr.reward, tr.done
