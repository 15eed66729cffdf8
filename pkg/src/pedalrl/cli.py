"""Command-line entry points: train, eval, sweep, bridge-serve, bench."""

import argparse
import os
import sys
import time

import numpy as np

from . import kernels
from .bridge import serve_policies
from .config import apply_overrides, load_config
from .harness import (
    config_from_dict,
    evaluate_agents,
    make_env,
    sweep,
    train_setting,
)
from .ppo import load_checkpoint, save_checkpoint


def parse_settings(text: str) -> list:
    """Setting selections: '3', '2,4,6' or an inclusive range '1..8'."""
    text = text.strip()
    if ".." in text:
        lo, hi = text.split("..", 1)
        ids = list(range(int(lo), int(hi) + 1))
    else:
        ids = [int(tok) for tok in text.split(",") if tok.strip()]
    if not ids:
        raise ValueError("no settings in %r" % text)
    return ids


def _config_dict(args) -> dict:
    cfg = {}
    if getattr(args, "config", None):
        cfg.update(load_config(args.config))
    cfg = apply_overrides(cfg, getattr(args, "set", None) or [])
    for flag, key in (("setting", "setting"), ("subject", "subject"), ("seed", "seed")):
        value = getattr(args, flag, None)
        if value is not None:
            cfg[key] = value
    return cfg


def cmd_train(args) -> int:
    cfg = config_from_dict(_config_dict(args))
    result, mean, traces = train_setting(cfg)
    out = args.out or cfg.output_dir
    os.makedirs(out, exist_ok=True)
    ckpt = os.path.join(out, "setting%d.ckpt" % cfg.setting_id)
    save_checkpoint(
        ckpt,
        result.human,
        result.machine,
        meta={"setting": cfg.setting_id, "seed": cfg.seed, "subject": cfg.subject},
    )
    curve_path = os.path.join(out, "value_curve_setting%d.csv" % cfg.setting_id)
    with open(curve_path, "w") as fh:
        fh.write("episode,value\n")
        for i, v in enumerate(result.value_curve):
            fh.write("%d,%s\n" % (i, repr(float(v))))
    print("setting %d  subject %s  seed %d" % (cfg.setting_id, cfg.subject, cfg.seed))
    print(
        "value %.4f  human_action_mse %.4f  tracking_error_mse %.6f"
        % (mean.value, mean.human_action_mse, mean.tracking_error_mse)
    )
    print("checkpoint: %s" % ckpt)
    return 0


def cmd_eval(args) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    meta = ckpt.get("meta", {})
    cfg_dict = _config_dict(args)
    for key in ("setting", "seed", "subject"):
        if key not in cfg_dict and key in meta:
            cfg_dict[key] = type_cast_meta(meta[key])
    cfg = config_from_dict(cfg_dict)
    env = make_env(cfg)
    episodes = args.episodes or cfg.eval_episodes
    mean, _ = evaluate_agents(
        ckpt["human.actor"], ckpt["machine.actor"], env, episodes, cfg.seed
    )
    print(
        "episodes %d  value %.4f  human_action_mse %.4f  tracking_error_mse %.6f"
        % (episodes, mean.value, mean.human_action_mse, mean.tracking_error_mse)
    )
    return 0


def type_cast_meta(value: str):
    try:
        return int(value)
    except (TypeError, ValueError):
        return value


def cmd_sweep(args) -> int:
    ids = parse_settings(args.settings)
    cfg = config_from_dict(_config_dict(args))
    out = args.out or cfg.output_dir
    rows = sweep(ids, cfg, out_dir=out)
    print("setting  value        human_action_mse  tracking_error_mse")
    for sid in sorted(rows):
        mean, _ = rows[sid]
        print(
            "%7d  %-11.4f  %-16.4f  %.6f"
            % (sid, mean.value, mean.human_action_mse, mean.tracking_error_mse)
        )
    print("results: %s" % out)
    return 0


def cmd_bridge_serve(args) -> int:
    print("serving %s from %s" % (args.endpoint, args.checkpoint))
    serve_policies(args.endpoint, args.checkpoint, stochastic=args.stochastic)
    return 0


def cmd_bench(args) -> int:
    """Time the fused substep kernel: compiled backend vs pure Python."""
    interval = args.interval
    blocks = args.blocks
    noise = np.zeros(interval)
    plant_p = np.array([0.3, 1.0, 30.0, 0.01, -0.6, 0.6, 10.0])
    ref_p = np.array([0.3, 4.0, 0.0, 0.0])

    def run(fn):
        sim = np.zeros(kernels.SIM_SIZE)
        queue = np.zeros(5, dtype=np.int64)
        n = blocks * interval
        outs = [np.empty(n) for _ in range(6)]
        start = time.perf_counter()
        for b in range(blocks):
            digit = (-2, -1, 0, 1, 2)[b % 5]
            fn(
                sim, queue, digit, 24.0, 2.4, 24.0, 12.5, 30.0, 0.2, 15.0, 0.1,
                5.0, 0.2, noise, plant_p, ref_p, *outs, b * interval, interval,
            )
        elapsed = time.perf_counter() - start
        return elapsed, outs[2].copy()

    if kernels.NUMBA_ENABLED:
        kernels.warmup()
        jit_time, jit_pos = run(kernels.run_substeps)
    else:
        jit_time, jit_pos = None, None
    py_time, py_pos = run(kernels.run_substeps_python)

    steps = blocks * interval
    print("substeps: %d (blocks=%d, interval=%d)" % (steps, blocks, interval))
    print("python backend: %.4f s  (%.0f steps/s)" % (py_time, steps / py_time))
    if jit_time is None:
        print("numba backend: unavailable (not installed or disabled)")
    else:
        print("numba backend:  %.4f s  (%.0f steps/s)" % (jit_time, steps / jit_time))
        print("speedup: %.1fx" % (py_time / jit_time))
        same = np.array_equal(jit_pos, py_pos)
        print("backends bit-identical: %s" % same)
        if not same:
            return 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pedalrl",
        description="Dual-agent RL lab for robot-assisted ankle rehabilitation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, seed_required=False):
        p.add_argument("--config", help="flat key-value config file")
        p.add_argument(
            "--set", action="append", metavar="KEY=VALUE",
            help="config override (repeatable)",
        )
        p.add_argument("--subject", help="subject profile name")
        p.add_argument("--seed", type=int, required=seed_required)

    p_train = sub.add_parser("train", help="train one setting")
    p_train.add_argument("--setting", type=int, required=True)
    common(p_train, seed_required=True)
    p_train.add_argument("--out", help="output directory")
    p_train.set_defaults(fn=cmd_train)

    p_eval = sub.add_parser("eval", help="evaluate a checkpoint")
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--setting", type=int)
    common(p_eval)
    p_eval.add_argument("--episodes", type=int)
    p_eval.set_defaults(fn=cmd_eval)

    p_sweep = sub.add_parser("sweep", help="train and compare settings")
    p_sweep.add_argument("--settings", required=True, help="e.g. 1..8 or 2,4")
    common(p_sweep, seed_required=True)
    p_sweep.add_argument("--out", help="output directory")
    p_sweep.set_defaults(fn=cmd_sweep)

    p_serve = sub.add_parser("bridge-serve", help="serve policies over a socket")
    p_serve.add_argument("--endpoint", required=True, help="HOST:PORT")
    p_serve.add_argument("--checkpoint", required=True)
    p_serve.add_argument("--stochastic", action="store_true")
    p_serve.set_defaults(fn=cmd_bridge_serve)

    p_bench = sub.add_parser("bench", help="compare kernel backends")
    p_bench.add_argument("--blocks", type=int, default=20000)
    p_bench.add_argument("--interval", type=int, default=10)
    p_bench.set_defaults(fn=cmd_bench)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ValueError, OSError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
