import argparse
import os
import sys

import dotenv

from rewardmap.curriculum import GRANULARITIES
from rewardmap.errors import RewardMapError
from rewardmap.flow import FLOW_FACTORIES
from rewardmap.grpo_sim import MODES
from rewardmap.utils.config import deep_merge, load_config
from rewardmap.utils.manifest import RunManifest, replace_out
from rewardmap.utils.run_log import configure_logging, get_logger

dotenv.load_dotenv()

logger = get_logger("main")


def positive_int(value):
    try:
        number = int(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got '{value}'")
    if number < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {number}")
    return number


def non_negative_float(value):
    try:
        number = float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got '{value}'")
    if number < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative number, got {number}")
    return number


def labeled_path(value):
    label, sep, path = value.partition("=")
    if not sep or not label or not path:
        raise argparse.ArgumentTypeError(f"expected LABEL=PATH, got '{value}'")
    return label, path


def build_parser():
    parser = argparse.ArgumentParser(
        prog="rewardmap",
        description="Transit-map question generation, reward scoring and curriculum GRPO simulation.",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="Root seed for every random choice (default: 0)")
    common.add_argument("--config", help="YAML file merged over the packaged defaults (default: $REWARDMAP_CONFIG)")
    common.add_argument("--out", required=True, help="Output directory")

    networks = argparse.ArgumentParser(add_help=False)
    networks.add_argument("--include", nargs="+", help="Network file patterns (default: '*.json')")
    networks.add_argument("--exclude", nargs="+", help="Patterns to skip (default: run artifacts)")

    genmap = subparsers.add_parser("genmap", parents=[common], help="Generate synthetic transit networks")
    genmap.add_argument("--count", type=positive_int, default=5, help="Number of networks (default: 5)")
    genmap.add_argument("--lines", type=positive_int, help="Lines per network")
    genmap.add_argument("--min-stops", type=positive_int, help="Fewest stops on a line")
    genmap.add_argument("--max-stops", type=positive_int, help="Most stops on a line")
    genmap.add_argument("--transfer-density", type=non_negative_float, help="Share of distinct stops that are transfer hubs")

    genqa = subparsers.add_parser("genqa", parents=[common, networks], help="Generate a balanced question dataset")
    genqa.add_argument("--networks", required=True, help="Directory of Metro Data files")
    genqa.add_argument("--holdout", nargs="+", help="Network ids for the test split")
    genqa.add_argument("--holdout-count", type=positive_int, help="Number of networks to hold out at random")
    genqa.add_argument("--planning-count", type=int, help="Planning questions per network")

    score = subparsers.add_parser("score", parents=[common, networks], help="Score an answers file")
    score.add_argument("--dataset", nargs="+", required=True, help="Dataset JSONL file(s)")
    score.add_argument("--answers", required=True, help="Answers: JSONL {qa_id, answer} or a JSON object")
    score.add_argument("--networks", help="Directory of Metro Data files (needed for planning items)")

    train = subparsers.add_parser("train", parents=[common, networks], help="Run a curriculum GRPO simulation")
    train.add_argument("--dataset", nargs="+", required=True, help="Training JSONL file(s)")
    train.add_argument("--eval-dataset", nargs="+", help="Held-out JSONL file(s) for evaluation")
    train.add_argument("--networks", required=True, help="Directory of Metro Data files")
    train.add_argument("--mode", choices=MODES, default="rewardmap")
    train.add_argument("--granularity", choices=GRANULARITIES, help="Curriculum granularity")
    train.add_argument("--steps", type=positive_int, help="Stop after this many update steps")
    train.add_argument("--group-size", type=positive_int, help="Responses per query (K)")
    train.add_argument("--learning-rate", type=non_negative_float)
    train.add_argument("--kl-coeff", type=non_negative_float)
    train.add_argument("--epochs-per-stage", type=positive_int)

    curves = subparsers.add_parser("curves", parents=[common], help="Merge training logs by step")
    curves.add_argument(
        "--log", type=labeled_path, action="append", required=True, help="LABEL=PATH of a training_log.csv"
    )

    sweep = subparsers.add_parser("sweep", parents=[common, networks], help="Train every mode x granularity x seed")
    sweep.add_argument("--dataset", nargs="+", required=True, help="Training JSONL file(s)")
    sweep.add_argument("--eval-dataset", nargs="+", help="Held-out JSONL file(s) for evaluation")
    sweep.add_argument("--networks", required=True, help="Directory of Metro Data files")
    sweep.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2, 3, 4])
    sweep.add_argument("--modes", nargs="+", choices=MODES, default=["baseline", "rewardmap"])
    sweep.add_argument("--granularities", nargs="+", choices=GRANULARITIES, default=["fine"])
    sweep.add_argument("--steps", type=positive_int, help="Stop each run after this many update steps")

    replay = subparsers.add_parser("replay", help="Re-run a recorded command into a new directory")
    replay.add_argument("manifest", help="manifest.yaml or the directory holding it")
    replay.add_argument("--out", required=True, help="Output directory for the re-run")

    return parser


def flag_overrides(args):
    """Config sections set by explicit flags; flags win over every config file"""
    overrides = {
        "network": {
            "line_count": getattr(args, "lines", None),
            "min_stops": getattr(args, "min_stops", None),
            "max_stops": getattr(args, "max_stops", None),
            "transfer_density": getattr(args, "transfer_density", None),
        },
        "split": {"holdout_count": getattr(args, "holdout_count", None)},
        "quotas": {"planning": getattr(args, "planning_count", None)},
        "curriculum": {
            "granularity": getattr(args, "granularity", None),
            "epochs_per_stage": getattr(args, "epochs_per_stage", None),
        },
        "train": {
            "max_steps": getattr(args, "steps", None),
            "K": getattr(args, "group_size", None),
            "learning_rate": getattr(args, "learning_rate", None),
            "kl_coeff": getattr(args, "kl_coeff", None),
        },
    }
    return {
        section: {k: v for k, v in values.items() if v is not None}
        for section, values in overrides.items()
        if any(v is not None for v in values.values())
    }


def build_shared(args, argv, config):
    shared = {
        "command": args.command,
        "argv": list(argv),
        "config": config,
        "seed": args.seed,
        "out_dir": args.out,
        "inputs": {},
        "outputs": [],
        "exit_code": 0,
        "networks": {},
        "networks_dir": getattr(args, "networks", None),
        "networks_required": args.command != "score",
        "include_patterns": set(args.include) if getattr(args, "include", None) else None,
        "exclude_patterns": set(args.exclude) if getattr(args, "exclude", None) else None,
    }
    if args.command == "genmap":
        shared["count"] = args.count
    elif args.command == "genqa":
        shared["holdout"] = args.holdout
    elif args.command == "score":
        shared["dataset_paths"] = args.dataset
        shared["answers_path"] = args.answers
    elif args.command == "train":
        shared["dataset_paths"] = args.dataset
        shared["eval_dataset_paths"] = args.eval_dataset
        shared["mode"] = args.mode
    elif args.command == "curves":
        shared["curve_logs"] = args.log
    elif args.command == "sweep":
        shared["dataset_paths"] = args.dataset
        shared["eval_dataset_paths"] = args.eval_dataset
        shared["sweep_seeds"] = args.seeds
        shared["sweep_modes"] = args.modes
        shared["sweep_granularities"] = args.granularities
    return shared


def run(argv, config=None):
    """
    Parse argv and run one command.

    Args:
        argv: Arguments without the program name
        config: Resolved configuration to use instead of loading one (replay)

    Returns:
        Process exit code
    """
    args = build_parser().parse_args(argv)
    try:
        if args.command == "replay":
            manifest = RunManifest.read(args.manifest)
            print(f"Replaying '{manifest.command}' from {args.manifest} into {args.out}")
            return run(replace_out(manifest.argv, args.out), config=manifest.config)

        resolved = deep_merge(config if config is not None else load_config(args.config), flag_overrides(args))
        os.makedirs(args.out, exist_ok=True)
        shared = build_shared(args, argv, resolved)
        logger.info(f"Running {args.command} with seed {args.seed} into {args.out}")

        FLOW_FACTORIES[args.command]().run(shared)
        return shared["exit_code"]
    except RewardMapError as e:
        logger.error(f"{args.command} failed: {e}")
        print(f"error: {e}", file=sys.stderr)
        return 1


def main(argv=None):
    configure_logging()
    return run(sys.argv[1:] if argv is None else list(argv))


if __name__ == "__main__":
    sys.exit(main())
