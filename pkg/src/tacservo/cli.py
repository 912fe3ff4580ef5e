"""Command-line front end: run tasks, sweep filter noise, generate datasets.

Commands:

    tacservo run CONFIG [--validate-only] [--seed N] [--out-dir DIR]
    tacservo filter-sweep --levels 10 1 0.1 0.01 [--seed N] [--steps N]
                          [--n-seeds N] [--out-dir DIR]
    tacservo gen-dataset --n 6000 --out PATH [--seed N]

Exit codes: 0 normal termination, 1 configuration/parse error, 2 aborted run.
Runs are idempotent: identical config and seed produce byte-identical files.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import control as ctl
from .bayes import run_noise_sweep
from .sensing import SurrogateNoiseProfile, dataset_to_csv, generate_dataset
from .simenv import TaskConfig, atomic_write_text, run_task


class ConfigError(Exception):
    pass


def _load_json(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except FileNotFoundError:
        raise ConfigError(f"{path}: no such file")
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}:{e.lineno}:{e.colno}: {e.msg}")


def _build_task_config(raw: dict, config_path: str) -> tuple[TaskConfig, int, str]:
    """Validate a run-config dict and build the TaskConfig.

    Returns (config, seed, out_dir).  Controller references may be built-in
    names or paths to parameter files (resolved relative to the config file).
    """
    if "task" not in raw:
        raise ConfigError(f"{config_path}: missing required key 'task'")
    task = raw["task"]
    seed = int(raw.get("seed", 0))
    out_dir = raw.get("out_dir", "runs")

    overrides: dict = {}
    for key in ("control_rate_hz", "duration_s", "max_steps", "sigma_phi"):
        if key in raw:
            overrides[key] = raw[key]
    if "filter_sigma_phi_mm_deg" in raw:
        overrides["sigma_phi"] = raw["filter_sigma_phi_mm_deg"]
    if "surrogate" in raw:
        s = raw["surrogate"]
        try:
            overrides["surrogate"] = SurrogateNoiseProfile(
                sigma=np.asarray(s["sigma_mm_deg"], dtype=float),
                aliasing_slip_threshold=float(s.get("aliasing_slip_threshold_mm", 4.0)),
                aliasing_inflation=float(s.get("aliasing_inflation", 4.0)),
            )
        except (KeyError, ValueError) as e:
            raise ConfigError(f"{config_path}: bad surrogate profile: {e}")

    base = os.path.dirname(os.path.abspath(config_path))
    for cfg_key, raw_key in (("controller", "controller"), ("follower_controller", "follower_controller")):
        if raw_key not in raw:
            continue
        ref = raw[raw_key]
        if isinstance(ref, dict):
            overrides[cfg_key] = ref
        elif ref in ctl.builtin_controller_names():
            overrides[cfg_key] = ref
        else:
            path = ref if os.path.isabs(ref) else os.path.join(base, ref)
            if not os.path.exists(path):
                raise ConfigError(
                    f"{config_path}: controller {ref!r} is neither a built-in "
                    f"({', '.join(ctl.builtin_controller_names())}) nor an existing file"
                )
            try:
                overrides[cfg_key] = ctl.load_controller_params(path)
            except json.JSONDecodeError as e:
                raise ConfigError(f"{path}:{e.lineno}:{e.colno}: {e.msg}")

    if "task_params" in raw:
        overrides.update(raw["task_params"])

    try:
        cfg = TaskConfig.for_task(task, overrides=overrides)
    except (KeyError, ValueError) as e:
        raise ConfigError(f"{config_path}: {e}")
    return cfg, seed, out_dir


def cmd_run(config_path: str, validate_only: bool = False, seed=None, out_dir=None) -> int:
    try:
        raw = _load_json(config_path)
        cfg, cfg_seed, cfg_out = _build_task_config(raw, config_path)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    if seed is not None:
        cfg_seed = seed
    if out_dir is not None:
        cfg_out = out_dir
    if validate_only:
        print(f"{config_path}: OK (task={cfg.task}, seed={cfg_seed})")
        return 0
    log = run_task(cfg.task, cfg, seed=cfg_seed)
    stem = f"{cfg.task}_seed{cfg_seed}"
    csv_path, meta_path = log.write(cfg_out, stem)
    print(f"wrote {csv_path} and {meta_path} ({log.meta['n_steps']} steps, "
          f"{log.meta['termination_reason']})")
    return 2 if log.meta["termination_reason"].startswith("aborted") else 0


_SWEEP_COMPONENTS = ["v_x_mm", "v_y_mm", "v_z_mm", "w_x_deg", "w_y_deg", "w_z_deg"]


def cmd_filter_sweep(levels, seed: int = 0, steps: int = 2000, n_seeds: int = 5,
                     out_dir: str = "runs") -> int:
    levels = [float(x) for x in levels]
    if any(lv <= 0 for lv in levels):
        print("error: sweep levels must be positive", file=sys.stderr)
        return 1
    results = run_noise_sweep(levels, steps=steps, seeds=n_seeds, base_seed=seed)
    header = (
        ["sigma"]
        + [f"raw_mae_{c}" for c in _SWEEP_COMPONENTS]
        + [f"filtered_mae_{c}" for c in _SWEEP_COMPONENTS]
    )
    lines = [",".join(header)]
    for r in results:
        vals = [r["sigma"]] + list(r["raw_mae"]) + list(r["filtered_mae"])
        lines.append(",".join(f"{v:.10g}" for v in vals))
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, f"filter_sweep_seed{seed}.csv")
    atomic_write_text(path, "\n".join(lines) + "\n")
    print(f"wrote {path}")
    return 0


def cmd_gen_dataset(n: int, out_path: str, seed: int = 0) -> int:
    if n <= 0:
        print("error: --n must be positive", file=sys.stderr)
        return 1
    rng = np.random.default_rng(seed)
    samples = generate_dataset(rng, n)
    try:
        atomic_write_text(out_path, dataset_to_csv(samples))
    except OSError as e:
        print(f"error: cannot write {out_path}: {e}", file=sys.stderr)
        return 1
    print(f"wrote {out_path} ({n} samples)")
    return 0


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tacservo",
                                description="Tactile pose-and-shear servoing toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a closed-loop task from a config file")
    run.add_argument("config", help="path to a JSON run config")
    run.add_argument("--validate-only", action="store_true",
                     help="parse and check the config without side effects")
    run.add_argument("--seed", type=int, default=None, help="override the config seed")
    run.add_argument("--out-dir", default=None, help="override the output directory")

    sweep = sub.add_parser("filter-sweep",
                           help="synthetic filter-noise sweep (raw vs filtered MAE)")
    sweep.add_argument("--levels", type=float, nargs="+", required=True)
    sweep.add_argument("--seed", type=int, default=0)
    sweep.add_argument("--steps", type=int, default=2000)
    sweep.add_argument("--n-seeds", type=int, default=5)
    sweep.add_argument("--out-dir", default="runs")

    gen = sub.add_parser("gen-dataset", help="write a contact/label training dataset CSV")
    gen.add_argument("--n", type=int, required=True)
    gen.add_argument("--out", required=True)
    gen.add_argument("--seed", type=int, default=0)

    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.command == "run":
        return cmd_run(args.config, validate_only=args.validate_only,
                       seed=args.seed, out_dir=args.out_dir)
    if args.command == "filter-sweep":
        return cmd_filter_sweep(args.levels, seed=args.seed, steps=args.steps,
                                n_seeds=args.n_seeds, out_dir=args.out_dir)
    return cmd_gen_dataset(args.n, args.out, seed=args.seed)


if __name__ == "__main__":
    sys.exit(main())
