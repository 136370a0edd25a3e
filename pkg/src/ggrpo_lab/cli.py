"""Command line runner: `ggrpo-lab run|compare <config>` and `ggrpo-lab advantage`.

Exit codes: 0 success, 2 config or usage error, 3 runtime error.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

from .core.advantage import dr_grpo_advantage, ema_grpo_advantage, g_grpo_advantage, grpo_advantage
from .core.config import load_config, resolve_output_dir
from .core.errors import ConfigError, UsageError
from .core.formatters import format_float
from .core.models import EmaState, ExperimentConfig, RolloutGroup
from .core.reports import write_comparison_artifacts, write_run_artifacts
from .core.simulator import compare_estimators, train

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ggrpo-lab",
        description="Group-relative advantage experiments on synthetic multi-task environments",
    )
    parser.add_argument(
        "--log-level",
        default="INFO",
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        help="Logging verbosity (default: INFO)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    for name, help_text in (
        ("run", "Train (or compare, per the config's mode) and write artifacts"),
        ("compare", "Run every estimator under identical seeds and write a comparison"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("config", help="Path to the YAML experiment file")
        p.add_argument(
            "--output-dir",
            default=None,
            help="Override output_dir from the config (else $GGRPO_OUTPUT_DIR, else ./runs)",
        )

    adv = sub.add_parser("advantage", help="Print advantages for one reward group")
    adv.add_argument(
        "--rewards",
        required=True,
        help="Comma-separated rewards, e.g. 10,20,30,40 (use --rewards=-1,2 for a leading minus)",
    )
    adv.add_argument("--estimator", default="ggrpo", choices=["grpo", "drgrpo", "emagrpo", "ggrpo"])
    adv.add_argument("--ema-alpha", type=float, default=0.9, help="EMA decay for emagrpo")
    adv.add_argument("--ema-sigma", type=float, default=None, help="Previous smoothed std for emagrpo")
    adv.add_argument("--epsilon", type=float, default=1e-6, help="Stability constant")
    return parser


def parse_rewards(text: str) -> List[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError as e:
        raise UsageError(f"--rewards must be comma-separated numbers: {e}") from e


def advantage_oneshot(args: argparse.Namespace) -> List[float]:
    """Advantages for the rewards given on the command line, in input order."""
    rewards = parse_rewards(args.rewards)
    if len(rewards) < 2:
        raise UsageError(f"--rewards needs at least 2 values. Got {len(rewards)}")
    if args.estimator == "ggrpo":
        return g_grpo_advantage(rewards).tolist()

    group = RolloutGroup(task_id="cli", rewards=rewards, response_lengths=[1] * len(rewards))
    if args.estimator == "grpo":
        return grpo_advantage(group, args.epsilon).values
    if args.estimator == "drgrpo":
        return dr_grpo_advantage(group).values
    state = EmaState(
        task_id="cli",
        sigma=args.ema_sigma or 0.0,
        decay=args.ema_alpha,
        initialized=args.ema_sigma is not None,
    )
    vector, _ = ema_grpo_advantage(group, state, args.epsilon)
    return vector.values


def run_experiment(config: ExperimentConfig, out_dir: Path, compare: bool) -> List[Path]:
    if compare or config.mode == "compare":
        report = compare_estimators(
            config.trainer, config.tasks, outlier_sensitivity=config.compare_outlier_sensitivity
        )
        return write_comparison_artifacts(report, config, out_dir)
    metrics = train(config.trainer, config.tasks)
    return write_run_artifacts(metrics, config, out_dir)


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, args.log_level),
        format="%(asctime)s - %(levelname)s - %(name)s - %(message)s",
        stream=sys.stderr,
    )

    if args.command == "advantage":
        try:
            values = advantage_oneshot(args)
        except (UsageError, ValueError) as e:
            print(f"error: {e}", file=sys.stderr)
            return EXIT_CONFIG
        for value in values:
            print(format_float(value))
        return EXIT_OK

    try:
        config = load_config(args.config)
    except ConfigError as e:
        print(e.diagnostic(), file=sys.stderr)
        return EXIT_CONFIG

    out_dir = Path(args.output_dir) if args.output_dir else resolve_output_dir(config)
    try:
        written = run_experiment(config, out_dir, compare=args.command == "compare")
    except UsageError as e:
        print(f"{args.config}: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as e:
        print(f"error: cannot write to {out_dir}: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception:
        logger.exception("Run failed")
        return EXIT_RUNTIME

    logger.info("Wrote %d files to %s", len(written), out_dir)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
