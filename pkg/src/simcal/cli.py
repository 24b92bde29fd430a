from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Sequence

from simcal.core import RandomStream
from simcal.density import MODEL_KINDS, load_checkpoint
from simcal.inference import abc_rejection_oracle
from simcal.pipeline import RuntimeSettings, parse_config, run, surrogate_real_trajectory, write_posterior_samples
from simcal.simulators import TASK_NAMES
from simcal.simulators.rollout import POLICY_KINDS

logger = logging.getLogger(__name__)


def _add_config_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, default=None, help="YAML run configuration.")
    parser.add_argument("--task", choices=TASK_NAMES, default=None)
    parser.add_argument("--logdir", default=None)
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--model", choices=MODEL_KINDS, default=None)
    parser.add_argument("--summarizer", default=None, help="Summarizer kind, e.g. crosscorrdiff or signature.")
    parser.add_argument("--policy", choices=sorted(POLICY_KINDS), default=None)
    parser.add_argument("--workers", type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="simcal", description="Adaptive likelihood-free calibration of simulators.")
    parser.add_argument("--env-file", default=None, help="dotenv file with SIMCAL_* settings.")
    commands = parser.add_subparsers(dest="command", required=True)

    run_parser = commands.add_parser("run", help="Run the adaptive calibration loop.")
    _add_config_arguments(run_parser)
    run_parser.add_argument("--iters", type=int, default=None)
    run_parser.add_argument("--init-mode", choices=("scratch", "finetune"), default=None)

    oracle_parser = commands.add_parser("oracle", help="ABC rejection posterior for the surrogate-real observation.")
    _add_config_arguments(oracle_parser)
    oracle_parser.add_argument("--n-sims", type=int, default=10_000)
    oracle_parser.add_argument("--quantile", type=float, default=0.01)
    oracle_parser.add_argument("--iteration", type=int, default=0, help="Iteration whose real trajectory is used.")
    oracle_parser.add_argument("--checkpoint", type=Path, default=None, help="Model whose standardizer scales distances.")
    oracle_parser.add_argument("--out", type=Path, default=None)
    return parser


def _overrides(args: argparse.Namespace) -> dict[str, Any]:
    return {
        "task": args.task,
        "logdir": args.logdir,
        "seed": args.seed,
        "workers": args.workers,
        "n_iters": getattr(args, "iters", None),
        "init_mode": getattr(args, "init_mode", None),
        "model.kind": args.model,
        "summarizer.kind": args.summarizer,
        "policy.kind": args.policy,
    }


def _command_run(args: argparse.Namespace, settings: RuntimeSettings) -> int:
    config = parse_config(args.config, _overrides(args), settings=settings)
    result = run(config)
    print(f"run_name={result.run_name} iterations={len(result.records)} run_dir={result.run_dir}")
    return 0


def _command_oracle(args: argparse.Namespace, settings: RuntimeSettings) -> int:
    config = parse_config(args.config, _overrides(args), settings=settings, echo=False)
    prior = config.build_prior()
    standardizer = load_checkpoint(args.checkpoint).standardizer if args.checkpoint else None
    result = abc_rejection_oracle(
        config.build_task(),
        prior,
        config.policy,
        surrogate_real_trajectory(config, args.iteration),
        config.summarizer,
        RandomStream(seed=config.seed, stream_id="oracle"),
        args.n_sims,
        args.quantile,
        standardizer=standardizer,
        workers=config.workers,
    )
    out = args.out or config.run_dir / f"oracle_iter{args.iteration}.csv"
    write_posterior_samples(result.accepted, prior.space.names, out)
    means = ",".join(f"{name}={value:.6g}" for name, value in zip(result.names, result.mean))
    print(f"accepted={result.n_accepted} threshold={result.threshold:.6g} mean[{means}] out={out}")
    return 0


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        settings = RuntimeSettings.from_env(env_file=args.env_file)
        logging.basicConfig(level=settings.log_level, format="%(asctime)s %(levelname)s %(name)s %(message)s")
        if args.command == "run":
            return _command_run(args, settings)
        return _command_oracle(args, settings)
    except Exception as exc:
        logger.debug("command failed", exc_info=True)
        message = " ".join(str(exc).split())
        print(f"simcal: error: {message}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
