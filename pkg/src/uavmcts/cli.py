"""``simulate`` command line entry point."""

from __future__ import annotations

import argparse
import logging
import sys

from .config import ConfigError
from .harness import ExperimentError, check_trace, load_config, parse_overrides, run_experiment


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="simulate", description="UAV-aided MEC path planning experiments.")
    p.add_argument("--config", help="YAML key-value file with world/experiment settings")
    p.add_argument("--algo", help="comma separated: mcts, ts_mcts, ql, dqn, random")
    p.add_argument("--episodes", type=int, help="training episodes (simulations per move for MCTS)")
    p.add_argument("--seeds", type=int, help="number of seeds")
    p.add_argument("--seed", type=int, help="base seed")
    p.add_argument("--velocity", type=float, help="UAV speed in m/s")
    p.add_argument("--hover-points", type=int, help="number of hover points K")
    p.add_argument("--layout", choices=["grid2d", "uniform2d", "planes3d"])
    p.add_argument("--mode", choices=["2d", "3d"])
    p.add_argument("--out", help="output directory for CSV files")
    p.add_argument("--checkpoints", help="comma separated episode checkpoints")
    p.add_argument("--eval-flights", type=int, help="evaluation flights averaged per checkpoint")
    p.add_argument("--wall-clock", action="store_true", help="write measured wall_ms into metrics.csv")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override any config key")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        overrides = parse_overrides(args.set)
        flags = {
            "algorithms": args.algo,
            "training_episodes": args.episodes,
            "num_seeds": args.seeds,
            "base_seed": args.seed,
            "uav_speed": args.velocity,
            "num_hover_points": args.hover_points,
            "hover_layout": args.layout,
            "mode": args.mode,
            "output_dir": args.out,
            "checkpoints": args.checkpoints,
            "eval_flights": args.eval_flights,
            "wall_clock": True if args.wall_clock else None,
        }
        overrides.update({k: v for k, v in flags.items() if v is not None})
        spec = load_config(args.config, overrides)
        if spec.output_dir is None:
            raise ConfigError("an output directory is required (--out)")
        result = run_experiment(spec)
    except (ConfigError, OSError) as exc:
        print(f"simulate: error: {exc}", file=sys.stderr)
        return 2
    except ExperimentError as exc:
        print(f"simulate: planning failed: {exc}", file=sys.stderr)
        return 3

    bad = 0
    for algo, seed in sorted(result.traces):
        path = f"{spec.output_dir}/trajectory_{algo}_{seed}.csv"
        problems = check_trace(path, spec.world)
        for msg in problems:
            print(f"{path}: {msg}", file=sys.stderr)
        bad += bool(problems)
    for (algo, episodes), s in result.summary().items():
        print(
            f"{algo:8s} episodes={episodes:5d} seeds={s['n_seeds']:3d} "
            f"reward={s['avg_reward_mean']:.4f}±{s['avg_reward_std']:.4f} "
            f"throughput={s['avg_throughput_mean']:.3f}±{s['avg_throughput_std']:.3f}"
        )
    return 4 if bad else 0


if __name__ == "__main__":
    sys.exit(main())
