"""Command-line entry points.

Verbs: train, eval, table, collect-expert, replay-verify, relabel, serve-teleop,
catalog. Exit code 0 on success, nonzero with a one-line machine-parsable error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np


def cmd_train(args) -> int:
    from .harness import RunConfig, train

    config = RunConfig.from_file(args.config)
    report = train(config)
    print(json.dumps(report))
    return 0


def cmd_eval(args) -> int:
    from .harness import evaluate

    seeds = [int(s) for s in args.seeds.split(",")] if args.seeds else [0]
    config = None
    if args.config:
        with open(args.config) as f:
            config = json.load(f)
    report = evaluate(args.policy, args.task, n_episodes=args.episodes,
                      seeds=seeds, config=config)
    print(json.dumps({
        "task_id": report.task_id,
        "per_seed": report.per_seed,
        "mean": report.mean,
        "episodes": report.episodes,
        "policy_file": report.policy_file,
    }))
    return 0


def cmd_table(args) -> int:
    from .harness import collect_reports, emit_results_table

    reports = collect_reports(args.runs)
    md, csv = emit_results_table(reports)
    print(md)
    if args.out_md:
        with open(args.out_md, "w") as f:
            f.write(md)
    if args.out_csv:
        with open(args.out_csv, "w") as f:
            f.write(csv)
    return 0


def cmd_collect_expert(args) -> int:
    from .harness import collect_expert

    stats = collect_expert(args.policy, args.steps, args.out,
                           task_id=args.task, seed=args.seed)
    print(json.dumps(stats))
    return 0


def cmd_replay_verify(args) -> int:
    from .data import verify_replay

    report = verify_replay(args.file)
    print(json.dumps({
        "passed": report.passed,
        "steps_checked": report.steps_checked,
        "max_obs_deviation": report.max_obs_deviation,
        "max_reward_deviation": report.max_reward_deviation,
        "first_divergence": report.first_divergence,
        "message": report.message,
    }))
    return 0 if report.passed else 2


def cmd_relabel(args) -> int:
    from .data import read_dataset, read_trajectory, write_trajectory
    from .learn import HERConfig, her_relabel
    from .tasks import TaskSpec

    her_cfg = HERConfig(strategy=args.strategy, k=args.k)
    her_cfg.validate()
    index = read_dataset(getattr(args, "in"))
    if not index.files:
        raise ValueError(f"no trajectory files in {getattr(args, 'in')}")
    os.makedirs(args.out, exist_ok=True)
    rng = np.random.default_rng(args.seed)
    written = 0
    for summary in index.files:
        header, initial_world, steps = read_trajectory(summary.path)
        spec = TaskSpec.from_dict(header["config"]["task"])
        out_steps = her_relabel(steps, her_cfg, spec, rng)
        out_header = dict(header)
        out_header["truncated"] = True  # relabeled copies carry interior terminals
        out_header["relabel"] = {"strategy": args.strategy, "k": args.k}
        name = os.path.basename(summary.path).replace(".jsonl", "_relabeled.jsonl")
        write_trajectory(os.path.join(args.out, name), out_header, initial_world, out_steps)
        written += 1
    print(json.dumps({"episodes": written, "strategy": args.strategy, "k": args.k}))
    return 0


def cmd_serve_teleop(args) -> int:
    from .teleop import TeleopConfig, serve

    config = TeleopConfig.from_file(args.config) if args.config else TeleopConfig()
    if args.host:
        config.host = args.host
    if args.port:
        config.port = args.port
    serve(config)
    return 0


def cmd_catalog(args) -> int:
    from .tasks import task_catalog

    print(json.dumps(task_catalog(), indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="deskhockey",
                                     description="Desk-scale air-hockey RL testbed")
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("train", help="train one algorithm on one task over seeds")
    p.add_argument("--config", required=True)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("eval", help="evaluate a policy file greedily")
    p.add_argument("--policy", required=True)
    p.add_argument("--task", required=True)
    p.add_argument("--episodes", type=int, default=50)
    p.add_argument("--seeds", default="")
    p.add_argument("--config")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("table", help="emit the results table over a sweep directory")
    p.add_argument("--runs", required=True)
    p.add_argument("--out-md")
    p.add_argument("--out-csv")
    p.set_defaults(fn=cmd_table)

    p = sub.add_parser("collect-expert", help="roll a trained policy into a dataset")
    p.add_argument("--policy", required=True)
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--task")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_collect_expert)

    p = sub.add_parser("replay-verify", help="re-simulate a trajectory file")
    p.add_argument("--file", required=True)
    p.set_defaults(fn=cmd_replay_verify)

    p = sub.add_parser("relabel", help="hindsight-relabel a goal-conditioned dataset")
    p.add_argument("--in", required=True)
    p.add_argument("--strategy", choices=["final", "future"], required=True)
    p.add_argument("--k", type=int, default=4)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_relabel)

    p = sub.add_parser("serve-teleop", help="run the live mouse-teleop service")
    p.add_argument("--config")
    p.add_argument("--host")
    p.add_argument("--port", type=int)
    p.set_defaults(fn=cmd_serve_teleop)

    p = sub.add_parser("catalog", help="print the machine-readable task catalog")
    p.set_defaults(fn=cmd_catalog)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ValueError, FileNotFoundError, RuntimeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
