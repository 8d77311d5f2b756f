"""Command-line entry point for rare-ais."""

import argparse
import logging
import math
from pathlib import Path
from typing import Sequence

from rare_ais.errors import RareEventError
from rare_ais.harness.config import ENV_NAMES, ExperimentConfig, load_config
from rare_ais.harness.runner import (
    ABLATION_SUITES,
    CALIBRATION_GRID,
    ExperimentRunner,
    build_env,
    calibrate_failure_threshold,
    run_ground_truth,
)


logger = logging.getLogger("rare_ais")

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def _env_overrides(args: argparse.Namespace) -> ExperimentConfig:
    overrides = {"env": args.env}
    for key in ("gamma_fail", "dynamics_form", "continuous_std_convention", "chain_threshold"):
        value = getattr(args, key)
        if value is not None:
            overrides[key] = value
    return ExperimentConfig().with_overrides(**overrides)


def _add_env_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--env", required=True, choices=ENV_NAMES)
    parser.add_argument("--samples", type=int, required=True, help="Monte Carlo episodes")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", type=Path, required=True, help="output JSON file")
    parser.add_argument("--gamma-fail", dest="gamma_fail", help="failure angle, e.g. 0.785 or pi/4")
    parser.add_argument("--dynamics-form", dest="dynamics_form", choices=("standard", "verbatim"))
    parser.add_argument("--std-convention", dest="continuous_std_convention", choices=("std", "variance"))
    parser.add_argument("--chain-threshold", dest="chain_threshold", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rare-ais",
        description="Adaptive importance sampling for rare failures in adversarial MDPs.",
    )
    parser.add_argument(
        "--log-level",
        default="INFO",
        choices=("DEBUG", "INFO", "WARNING", "ERROR"),
        help="root logger level (default INFO)",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    truth = commands.add_parser("ground-truth", help="long Monte Carlo reference run")
    _add_env_arguments(truth)

    calibrate = commands.add_parser("calibrate", help="pick the failure angle matching the published rate")
    _add_env_arguments(calibrate)
    calibrate.add_argument(
        "--grid",
        nargs="+",
        help="candidate failure angles (default pi/6 pi/4 pi/3 pi/2)",
    )

    run = commands.add_parser("run", help="run a configured experiment")
    run.add_argument("--config", type=Path, required=True)
    run.add_argument("--out", type=Path, required=True, help="output directory")

    ablate = commands.add_parser("ablate", help="run a paired ablation suite")
    ablate.add_argument("--suite", required=True, help=f"one of {', '.join(ABLATION_SUITES)}")
    ablate.add_argument("--config", type=Path, required=True)
    ablate.add_argument("--out", type=Path, required=True, help="output directory")

    view = commands.add_parser("view", help="browse a report in the terminal")
    view.add_argument("out", type=Path, help="directory holding report.json")
    return parser


def _grid(values: Sequence[str] | None) -> tuple[float, ...]:
    if not values:
        return CALIBRATION_GRID
    config = ExperimentConfig()
    return tuple(config.with_overrides(gamma_fail=v).gamma_fail for v in values)


def _command_ground_truth(args: argparse.Namespace) -> None:
    config = _env_overrides(args)
    env = build_env(config)
    truth = run_ground_truth(env, args.samples, args.seed)
    ExperimentRunner(args.out.parent).write_ground_truth(truth, args.out)
    print(f"{truth.env}: mu = {truth.mu:.6g} ± {truth.std_err:.3g} ({truth.n_samples} episodes)")


def _command_calibrate(args: argparse.Namespace) -> None:
    config = _env_overrides(args)
    result = calibrate_failure_threshold(config, args.samples, args.seed, _grid(args.grid))
    ExperimentRunner(args.out.parent).write_calibration(result, args.out)
    for c in result.candidates:
        mark = "pass" if c.passes else "    "
        print(f"{mark}  gamma_fail = {c.gamma_fail:.4f} ({c.gamma_fail / math.pi:.3f} pi): mu = {c.mu_hat:.4g}")
    print(f"empirical quantile: {result.quantile:.4f}")
    print(f"chosen: {result.chosen}")


def _command_run(args: argparse.Namespace) -> None:
    report = ExperimentRunner(args.out).run_experiment(load_config(args.config))
    (abs_mean, abs_std) = report.summary()["eps_abs"]
    (rel_mean, rel_std) = report.summary()["eps_rel"]
    print(f"eps_abs {abs_mean:.3f} ± {abs_std:.3f}  eps_rel {rel_mean:+.3f} ± {rel_std:.3f}")


def _command_ablate(args: argparse.Namespace) -> None:
    table = ExperimentRunner(args.out).run_ablation(args.suite, load_config(args.config))
    print(table.to_text(), end="")


def _command_view(args: argparse.Namespace) -> None:
    from rare_ais.viewer import ReportViewerApp

    ReportViewerApp(args.out).run()


COMMANDS = {
    "ground-truth": _command_ground_truth,
    "calibrate": _command_calibrate,
    "run": _command_run,
    "ablate": _command_ablate,
    "view": _command_view,
}


def main(argv: Sequence[str] | None = None) -> int:
    """Run the command line."""
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level, format=LOG_FORMAT)
    try:
        COMMANDS[args.command](args)
    except RareEventError as exc:
        logger.error("%s", exc)
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
