"""Plain-text run configuration: INI sections mirroring the env,
composition and optimizer settings.

Every key is optional with the dataclass default; unknown sections or
keys are rejected by name so typos cannot silently fall back to
defaults. The fully resolved configuration can be rendered back out
(and is echoed into run directories) in a stable format that reparses
to the same values.
"""

from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, field

from .env import EnvConfig
from .models import HighReParams, LowReParams
from .ppo import PPOConfig
from .train import BGPSConfig

__all__ = ["ConfigError", "ResolvedConfig", "parse_config", "load_config", "render_config"]


class ConfigError(ValueError):
    pass


def _to_bool(raw: str) -> bool:
    v = raw.strip().lower()
    if v in ("true", "yes", "1", "on"):
        return True
    if v in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


_ENV_KEYS = {
    "swimmer": str,
    "dt": float,
    "episode_steps": int,
    "reward_mode": str,
    "beta": float,
    "legacy_energy": _to_bool,
    "joint_limit": float,
    "max_joint_speed": float,
    "reset_mode": str,
    "time_features": _to_bool,
    # low-Re model parameters
    "link_length": float,
    "drag_constant": float,
    "lateral_ratio": float,
    # high-Re model parameters
    "rho": float,
    "semi_major": float,
    "semi_minor": float,
    "density_scale": float,
    "added_mass_scale": float,
}
_LOW_KEYS = ("link_length", "drag_constant", "lateral_ratio")
_HIGH_KEYS = ("rho", "semi_major", "semi_minor", "density_scale", "added_mass_scale")

_BGPS_KEYS = {"action_range": float, "use_baseline": _to_bool}

_PPO_KEYS = {
    "clip_epsilon": float,
    "gamma": float,
    "gae_lambda": float,
    "learning_rate": float,
    "epochs_per_update": int,
    "minibatch_size": int,
    "steps_per_update": int,
    "total_steps": int,
    "value_coef": float,
    "entropy_coef": float,
    "max_grad_norm": float,
    "seed": int,
}

_RUN_KEYS = {"out_dir": str, "eval_every": int}

_SECTIONS = {"env": _ENV_KEYS, "bgps": _BGPS_KEYS, "ppo": _PPO_KEYS, "run": _RUN_KEYS}


@dataclass
class ResolvedConfig:
    env: EnvConfig = field(default_factory=EnvConfig)
    bgps: BGPSConfig = field(default_factory=BGPSConfig)
    ppo: PPOConfig = field(default_factory=PPOConfig)
    out_dir: str | None = None
    eval_every: int = 10240


def _read_sections(text: str) -> dict[str, dict[str, str]]:
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    out: dict[str, dict[str, str]] = {}
    for section in cp.sections():
        if section not in _SECTIONS:
            raise ConfigError(
                f"unknown section [{section}] (expected one of {sorted(_SECTIONS)})"
            )
        schema = _SECTIONS[section]
        for key, raw in cp.items(section):
            if key not in schema:
                raise ConfigError(f"unknown key '{key}' in section [{section}]")
            out.setdefault(section, {})[key] = raw
    return out


def _convert(section: str, key: str, raw: str):
    try:
        return _SECTIONS[section][key](raw)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"bad value for [{section}] {key} = {raw!r}: {exc}") from exc


def parse_config(text: str, overrides: dict[str, str] | None = None) -> ResolvedConfig:
    """Parse INI text into fully resolved configs.

    ``overrides`` maps dotted "section.key" names to raw string values
    (how CLI flags are applied) and is validated the same way.
    """
    raw = _read_sections(text)
    for dotted, value in (overrides or {}).items():
        section, _, key = dotted.partition(".")
        if section not in _SECTIONS or key not in _SECTIONS[section]:
            raise ConfigError(f"unknown override '{dotted}'")
        raw.setdefault(section, {})[key] = str(value)

    env_raw = raw.get("env", {})
    low = {k: _convert("env", k, env_raw[k]) for k in _LOW_KEYS if k in env_raw}
    high = {k: _convert("env", k, env_raw[k]) for k in _HIGH_KEYS if k in env_raw}
    env_kwargs = {
        k: _convert("env", k, v)
        for k, v in env_raw.items()
        if k not in _LOW_KEYS and k not in _HIGH_KEYS
    }
    try:
        env = EnvConfig(
            low_re=LowReParams(**low), high_re=HighReParams(**high), **env_kwargs
        )
        bgps = BGPSConfig(
            **{k: _convert("bgps", k, v) for k, v in raw.get("bgps", {}).items()}
        )
        ppo = PPOConfig(
            **{k: _convert("ppo", k, v) for k, v in raw.get("ppo", {}).items()}
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    run_raw = raw.get("run", {})
    return ResolvedConfig(
        env=env,
        bgps=bgps,
        ppo=ppo,
        out_dir=run_raw.get("out_dir"),
        eval_every=_convert("run", "eval_every", run_raw["eval_every"])
        if "eval_every" in run_raw
        else 10240,
    )


def load_config(path, overrides: dict[str, str] | None = None) -> ResolvedConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read(), overrides)


def render_config(cfg: ResolvedConfig) -> str:
    """Stable full echo of a resolved configuration; reparses to the
    same values."""
    buf = io.StringIO()
    env = cfg.env

    def section(name: str, items: list[tuple[str, object]]):
        buf.write(f"[{name}]\n")
        for key, value in items:
            if isinstance(value, bool):
                value = "true" if value else "false"
            elif isinstance(value, float):
                value = f"{value:.17g}"
            buf.write(f"{key} = {value}\n")
        buf.write("\n")

    section(
        "env",
        [
            ("swimmer", env.swimmer),
            ("dt", env.dt),
            ("episode_steps", env.episode_steps),
            ("reward_mode", env.reward_mode),
            ("beta", env.beta),
            ("legacy_energy", env.legacy_energy),
            ("joint_limit", env.joint_limit),
            ("max_joint_speed", env.max_joint_speed),
            ("reset_mode", env.reset_mode),
            ("time_features", env.time_features),
            ("link_length", env.low_re.link_length),
            ("drag_constant", env.low_re.drag_constant),
            ("lateral_ratio", env.low_re.lateral_ratio),
            ("rho", env.high_re.rho),
            ("semi_major", env.high_re.semi_major),
            ("semi_minor", env.high_re.semi_minor),
            ("density_scale", env.high_re.density_scale),
            ("added_mass_scale", env.high_re.added_mass_scale),
        ],
    )
    section(
        "bgps",
        [("action_range", cfg.bgps.action_range), ("use_baseline", cfg.bgps.use_baseline)],
    )
    section("ppo", [(k, getattr(cfg.ppo, k)) for k in _PPO_KEYS])
    run_items: list[tuple[str, object]] = [("eval_every", cfg.eval_every)]
    if cfg.out_dir is not None:
        run_items.insert(0, ("out_dir", cfg.out_dir))
    section("run", run_items)
    return buf.getvalue()
