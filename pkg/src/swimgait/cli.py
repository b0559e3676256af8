"""Command-line front end.

Subcommands: ``field`` (exterior-derivative heatmaps), ``simulate``
(rollouts of the baseline, a zero policy or a trained checkpoint),
``gait`` (per-cycle displacement of a sinusoidal gait), ``train``
(baseline-guided policy search), ``compare`` (method / action-range
sweep tables) and ``bench`` (kernel backend benchmark).

Exit codes: 0 success, 1 usage/config error, 2 runtime or model error,
3 I/O error. SWIMGAIT_OUT sets the default output root.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import math
import os
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

USAGE_ERROR, RUNTIME_ERROR, IO_ERROR = 1, 2, 3


class _UsageExit(Exception):
    """Raised for bad command lines so main() can exit with code 1."""


class _ArgumentParser(argparse.ArgumentParser):
    # argparse exits 2 on bad usage; the documented contract is 1
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageExit(f"{self.prog}: error: {message}")


def _out_root(explicit) -> Path:
    if explicit:
        return Path(explicit)
    return Path(os.environ.get("SWIMGAIT_OUT", "."))


def _swimmer_kind(value: str) -> str:
    kind = value.replace("-", "_")
    if kind not in ("low_re", "high_re"):
        raise argparse.ArgumentTypeError(f"unknown swimmer {value!r}")
    return kind


def _env_from_args(args, base=None):
    """Build an EnvConfig from a base (default or checkpoint-provided)
    plus any explicitly set flags."""
    from .env import EnvConfig

    cfg = base if base is not None else EnvConfig()
    updates = {}
    for flag, field in (
        ("swimmer", "swimmer"),
        ("steps", "episode_steps"),
        ("dt", "dt"),
        ("reward", "reward_mode"),
        ("beta", "beta"),
        ("reset", "reset_mode"),
        ("joint_limit", "joint_limit"),
        ("max_joint_speed", "max_joint_speed"),
    ):
        value = getattr(args, flag, None)
        if value is not None:
            updates[field] = value
    return replace(cfg, **updates) if updates else cfg


# -- field -------------------------------------------------------------------

def cmd_field(args) -> int:
    from .fields import GridSpec, exterior_derivative_field, export_field
    from .models import HighReParams, LowReParams, make_model

    if args.swimmer == "low_re":
        params = LowReParams(
            link_length=args.link_length, lateral_ratio=args.lateral_ratio
        )
    else:
        params = HighReParams(semi_major=args.semi_major, semi_minor=args.semi_minor)
    model = make_model(args.swimmer, params)
    grid = GridSpec(args.alpha_min, args.alpha_max, args.resolution)
    fld = exterior_derivative_field(model.connection_batch, grid, args.row)

    root = _out_root(args.out_dir)
    root.mkdir(parents=True, exist_ok=True)
    stem = f"field_{args.swimmer}_{args.row}"
    csv_path = Path(args.out_csv) if args.out_csv else root / f"{stem}.csv"
    svg_path = Path(args.out_svg) if args.out_svg else root / f"{stem}.svg"
    report = export_field(
        fld,
        csv_path,
        svg_path,
        title=f"{args.swimmer} swimmer, body-{args.row} exterior derivative",
    )
    print(f"wrote {report.csv_path} ({report.rows_written} rows) and {report.svg_path}")
    if report.n_missing:
        print(f"note: {report.n_missing} degenerate samples excluded")
    return 0


# -- simulate ----------------------------------------------------------------

def cmd_simulate(args) -> int:
    from .env import Action, baseline_policy, rollout, write_rollout_csv
    from .train import (
        configs_from_checkpoint,
        deterministic_policy,
        load_checkpoint,
        policy_from_checkpoint,
    )

    if args.checkpoint:
        ck = load_checkpoint(args.checkpoint)
        env_cfg, bgps, _ = configs_from_checkpoint(ck)
        env_cfg = _env_from_args(args, env_cfg)
        policy = deterministic_policy(policy_from_checkpoint(ck), env_cfg, bgps)
        label = f"checkpoint {args.checkpoint}"
    else:
        env_cfg = _env_from_args(args)
        if args.policy == "baseline":
            policy = baseline_policy
        else:
            policy = lambda state: Action(0.0, 0.0)  # noqa: E731
        label = f"{args.policy} policy"

    result = rollout(policy, env_cfg)
    if args.out:
        write_rollout_csv(result, args.out)
        print(f"wrote {args.out}")
    print(
        f"{label} on {env_cfg.swimmer} ({env_cfg.reward_mode}): "
        f"total reward {result.total_reward:.6g}, dx {result.dx:.6g}, "
        f"dtheta {result.dtheta:.6g}"
    )
    return 0


# -- gait ----------------------------------------------------------------------

def cmd_gait(args) -> int:
    from .env import GaitWaveform, JointWave, evaluate_gait
    from .models import HighReParams, LowReParams, make_model

    wf = GaitWaveform(
        JointWave(args.amp1, args.omega, 0.0, offset=args.offset1),
        JointWave(args.amp2, args.omega, args.phase2, offset=args.offset2),
    )
    params = LowReParams() if args.swimmer == "low_re" else HighReParams()
    model = make_model(args.swimmer, params)
    dx, dy, dth = evaluate_gait(wf, model, cycles=args.cycles)
    print(
        f"{args.swimmer} gait (amp {args.amp1:g}/{args.amp2:g}, phase lag "
        f"{args.phase2:g}): per cycle dx {dx:.6g}, dy {dy:.6g}, dtheta {dth:.6g}"
    )
    if args.check_stokes:
        from .fields import GridSpec, exterior_derivative_field, surface_integral

        field = exterior_derivative_field(
            model.connection_batch, GridSpec(-3.0, 3.0, 256), "theta"
        )
        surf = surface_integral(field, wf.joint_loop(segments=256))
        gap = abs(dth - surf) / max(abs(surf), 1e-3)
        print(f"stokes area integral (theta): {surf:.6g}, gap {gap:.2%}")
    return 0


# -- train -------------------------------------------------------------------

def cmd_train(args) -> int:
    from .configio import ResolvedConfig, load_config, parse_config, render_config
    from .ioutil import atomic_write_text
    from .train import train

    overrides: dict[str, str] = {}
    for dotted, value in (
        ("env.swimmer", args.swimmer),
        ("env.reward_mode", args.reward),
        ("bgps.action_range", args.action_range),
        ("ppo.total_steps", args.total_steps),
        ("ppo.steps_per_update", args.steps_per_update),
        ("ppo.seed", args.seed),
        ("run.eval_every", args.eval_every),
    ):
        if value is not None:
            overrides[dotted] = str(value)
    if args.no_baseline:
        overrides["bgps.use_baseline"] = "false"

    if args.config:
        cfg = load_config(args.config, overrides)
    else:
        cfg = parse_config("", overrides)

    out_dir = args.out or cfg.out_dir
    if out_dir is None:
        tag = f"run_{cfg.env.swimmer}_{cfg.env.reward_mode}_d{cfg.bgps.action_range}_s{cfg.ppo.seed}"
        out_dir = _out_root(None) / tag
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg = ResolvedConfig(cfg.env, cfg.bgps, cfg.ppo, str(out), cfg.eval_every)
    atomic_write_text(out / "config.resolved.ini", render_config(cfg))

    result = train(
        cfg.env,
        cfg.bgps,
        cfg.ppo,
        out,
        eval_every=cfg.eval_every,
        resume=args.resume,
        log=None if args.quiet else print,
    )
    print(
        f"trained {result.env_steps} steps: final eval {result.final_eval:.6g}, "
        f"best {result.best_eval:.6g}, baseline {result.baseline:.6g}"
    )
    print(f"run directory: {result.out_dir}")
    return 0


# -- compare -----------------------------------------------------------------

def _parse_matrix(path):
    """Split a matrix file into the sweep definition and the shared config."""
    import configparser

    from .configio import ConfigError, parse_config

    cp = configparser.ConfigParser(interpolation=None)
    with open(path, "r", encoding="utf-8") as fh:
        cp.read_file(fh)
    sweep = {
        "swimmers": ["low_re", "high_re"],
        "tasks": ["distance", "energy"],
        "methods": ["bfg", "ppo", "bgps"],
        "ranges": [0.6, 0.3, 0.2, 0.15, 0.1],
        "seeds": [0],
    }
    if cp.has_section("matrix"):
        known = set(sweep)
        for key, raw in cp.items("matrix"):
            if key not in known:
                raise ConfigError(f"unknown key '{key}' in section [matrix]")
            parts = [p.strip() for p in raw.split(",") if p.strip()]
            if key == "ranges":
                sweep[key] = [float(p) for p in parts]
            elif key == "seeds":
                sweep[key] = [int(p) for p in parts]
            else:
                sweep[key] = [p.replace("-", "_") for p in parts]
        cp.remove_section("matrix")
    buf = []
    for section in cp.sections():
        buf.append(f"[{section}]")
        buf.extend(f"{k} = {v}" for k, v in cp.items(section))
    base = parse_config("\n".join(buf))
    return sweep, base


def cmd_compare(args) -> int:
    from dataclasses import replace as dc_replace

    from .ioutil import atomic_write_text
    from .ppo import PPOConfig
    from .train import BGPSConfig, baseline_reward, run_cached_job

    sweep, base = _parse_matrix(args.matrix) if args.matrix else (None, None)
    if sweep is None:
        from .configio import parse_config

        base = parse_config("")
        sweep = {
            "swimmers": ["low_re", "high_re"],
            "tasks": ["distance", "energy"],
            "methods": ["bfg", "ppo", "bgps"],
            "ranges": [0.6, 0.3, 0.2, 0.15, 0.1],
            "seeds": [0],
        }
    if args.seeds:
        sweep["seeds"] = [int(s) for s in args.seeds.split(",")]
    if args.total_steps is not None:
        base = dc_replace(base, ppo=dc_replace(base.ppo, total_steps=args.total_steps))

    out = _out_root(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cache = out / "cells"

    def env_for(swimmer, task):
        return dc_replace(base.env, swimmer=swimmer, reward_mode=task)

    # assemble training jobs; bfg cells need no training
    jobs = {}
    for swimmer in sweep["swimmers"]:
        for task in sweep["tasks"]:
            env_cfg = env_for(swimmer, task)
            for method in sweep["methods"]:
                if method == "bfg":
                    continue
                ranges = sweep["ranges"] if method == "bgps" else [None]
                for rng_ in ranges:
                    for seed in sweep["seeds"]:
                        if method == "ppo":
                            bgps = BGPSConfig(
                                action_range=env_cfg.max_joint_speed, use_baseline=False
                            )
                        else:
                            bgps = BGPSConfig(action_range=rng_)
                        ppo = dc_replace(base.ppo, seed=seed)
                        jobs[(swimmer, task, method, rng_, seed)] = (
                            env_cfg,
                            bgps,
                            ppo,
                            str(cache),
                        )

    results: dict = {}
    if jobs:
        if args.workers > 1:
            with concurrent.futures.ProcessPoolExecutor(args.workers) as ex:
                futures = {ex.submit(run_cached_job, v): k for k, v in jobs.items()}
                for fut in concurrent.futures.as_completed(futures):
                    key = futures[fut]
                    try:
                        results[key] = fut.result()
                    except Exception as exc:  # cell failures shouldn't kill the sweep
                        results[key] = {"error": str(exc)}
        else:
            for key, value in jobs.items():
                try:
                    results[key] = run_cached_job(value)
                except Exception as exc:
                    results[key] = {"error": str(exc)}

    def column_names():
        cols = []
        for method in sweep["methods"]:
            if method == "bgps":
                cols.extend(("bgps", r) for r in sweep["ranges"])
            else:
                cols.append((method, None))
        return cols

    def cell_value(swimmer, task, method, rng_):
        if method == "bfg":
            try:
                return baseline_reward(env_for(swimmer, task)), "ok"
            except Exception as exc:
                return math.nan, f"failed: {exc}"
        vals = []
        for seed in sweep["seeds"]:
            r = results.get((swimmer, task, method, rng_, seed), {})
            if "final_eval" not in r:
                return math.nan, f"failed: {r.get('error', 'missing')}"
            vals.append(r["final_eval"])
        return float(np.mean(vals)), "ok"

    csv_lines = ["swimmer,task,method,action_range,seeds,mean_reward,status"]
    blocks = []
    seeds_txt = " ".join(str(s) for s in sweep["seeds"])
    for swimmer in sweep["swimmers"]:
        cols = column_names()
        header = ["task"] + [
            m.upper() if r is None else f"BGPS({r:g})" for m, r in cols
        ]
        rows = [header]
        for task in sweep["tasks"]:
            row = [task]
            for method, rng_ in cols:
                value, status = cell_value(swimmer, task, method, rng_)
                row.append("failed" if status != "ok" else f"{value:.6g}")
                csv_lines.append(
                    f"{swimmer},{task},{method},"
                    f"{'' if rng_ is None else rng_},{seeds_txt},"
                    f"{'' if math.isnan(value) else repr(value)},{status}"
                )
            rows.append(row)
        widths = [max(len(r[i]) for r in rows) for i in range(len(header))]
        lines = [f"swimmer: {swimmer} (seeds: {seeds_txt})"]
        for r in rows:
            lines.append("  ".join(c.ljust(w) for c, w in zip(r, widths)))
        blocks.append("\n".join(lines))

    table_txt = "\n\n".join(blocks) + "\n"
    atomic_write_text(out / "table.csv", "\n".join(csv_lines) + "\n")
    atomic_write_text(out / "table.txt", table_txt)
    print(table_txt, end="")
    print(f"wrote {out / 'table.csv'} and {out / 'table.txt'}")
    return 0


# -- bench -------------------------------------------------------------------

def cmd_bench(args) -> int:
    from ._kernels import BACKEND, available_backends
    from .models import low_re_model

    model = low_re_model()
    kargs = model.kernel_args
    print(f"selected backend: {BACKEND}")
    print(f"{'backend':<10} {'env step':>14} {'grid eval':>14}")
    for name, mod in available_backends().items():
        t0 = time.perf_counter()
        state = (0.0, 0.0, 0.1, 0.3, -0.2)
        for k in range(args.steps):
            t = 0.04 * k
            state = mod.env_step(
                *state, -0.6 * math.sin(t), -0.6 * math.sin(t - 1.0), 0.04, 3.0, *kargs
            )
        dt_step = (time.perf_counter() - t0) / args.steps
        ax = np.linspace(-3, 3, args.grid)
        g1, g2 = np.meshgrid(ax, ax, indexing="ij")
        t0 = time.perf_counter()
        mod.connection_batch(g1.ravel(), g2.ravel(), *kargs)
        dt_grid = time.perf_counter() - t0
        print(
            f"{name:<10} {dt_step * 1e6:>11.2f} us {dt_grid * 1e3:>11.2f} ms"
            f"  ({args.steps} steps, {args.grid}x{args.grid} grid)"
        )
    return 0


# -- parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(prog="swimgait", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("field", help="export an exterior-derivative field (CSV + SVG)")
    p.add_argument("--swimmer", type=_swimmer_kind, default="low_re")
    p.add_argument("--row", choices=("x", "y", "theta"), default="x")
    p.add_argument("--alpha-min", type=float, default=-3.0)
    p.add_argument("--alpha-max", type=float, default=3.0)
    p.add_argument("--resolution", type=int, default=128)
    p.add_argument("--link-length", type=float, default=0.3)
    p.add_argument("--lateral-ratio", type=float, default=2.0)
    p.add_argument("--semi-major", type=float, default=4.0)
    p.add_argument("--semi-minor", type=float, default=1.0)
    p.add_argument("--out-dir", default=None)
    p.add_argument("--out-csv", default=None)
    p.add_argument("--out-svg", default=None)
    p.set_defaults(func=cmd_field)

    p = sub.add_parser("simulate", help="roll out a policy and export the trajectory")
    p.add_argument("--policy", choices=("baseline", "zero"), default="baseline")
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--swimmer", type=_swimmer_kind, default=None)
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--dt", type=float, default=None)
    p.add_argument("--reward", choices=("distance", "energy"), default=None)
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--reset", choices=("baseline_t0", "zero"), default=None)
    p.add_argument("--joint-limit", type=float, default=None)
    p.add_argument("--max-joint-speed", type=float, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("gait", help="per-cycle displacement of a sinusoidal gait")
    p.add_argument("--swimmer", type=_swimmer_kind, default="low_re")
    p.add_argument("--amp1", type=float, default=0.6)
    p.add_argument("--amp2", type=float, default=0.6)
    p.add_argument("--phase2", type=float, default=1.0)
    p.add_argument("--omega", type=float, default=1.0)
    p.add_argument("--offset1", type=float, default=0.0)
    p.add_argument("--offset2", type=float, default=0.0)
    p.add_argument("--cycles", type=int, default=1)
    p.add_argument("--check-stokes", action="store_true")
    p.set_defaults(func=cmd_gait)

    p = sub.add_parser("train", help="run baseline-guided policy search")
    p.add_argument("--config", default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--swimmer", type=_swimmer_kind, default=None)
    p.add_argument("--reward", choices=("distance", "energy"), default=None)
    p.add_argument("--total-steps", type=int, default=None)
    p.add_argument("--steps-per-update", type=int, default=None)
    p.add_argument("--action-range", type=float, default=None)
    p.add_argument("--no-baseline", action="store_true")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--eval-every", type=int, default=None)
    p.add_argument("--resume", action="store_true")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("compare", help="method/action-range comparison table")
    p.add_argument("--matrix", default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--seeds", default=None)
    p.add_argument("--total-steps", type=int, default=None)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("bench", help="compare kernel backends")
    p.add_argument("--steps", type=int, default=20000)
    p.add_argument("--grid", type=int, default=128)
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv=None) -> int:
    from .configio import ConfigError
    from .train import CheckpointSchemaMismatch

    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except _UsageExit as exc:
        print(str(exc), file=sys.stderr)
        return USAGE_ERROR
    except (ConfigError, argparse.ArgumentTypeError) as exc:
        print(f"swimgait: config error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except CheckpointSchemaMismatch as exc:
        print(f"swimgait: checkpoint error: {exc}", file=sys.stderr)
        return RUNTIME_ERROR
    except ValueError as exc:
        print(f"swimgait: invalid argument: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except OSError as exc:
        print(f"swimgait: i/o error: {exc}", file=sys.stderr)
        return IO_ERROR
    except RuntimeError as exc:
        print(f"swimgait: error: {exc}", file=sys.stderr)
        return RUNTIME_ERROR


if __name__ == "__main__":
    sys.exit(main())
