"""HTD LR Scheduler - command-line entry point.

Subcommands:
- curve: sample a schedule and emit `t,lr` CSV
- ratio: evaluate the decreasing ratio r(x, delta)
- diff:  sup-norm distance between two schedules
- train: run one experiment from a JSON config
- sweep: run a sweep from a JSON config
- check: final rates and inflection geometry of HTD(-R*U, U) for U = 2, 3, 4

Exit codes: 0 success, 1 runtime error, 2 usage error.
"""

import argparse
import csv
import io
import json
import logging
import sys
from dataclasses import replace
from typing import Optional

from analysis import (
    RatioQuery,
    decreasing_ratio,
    inflection_fraction,
    proximity_to_csv,
    ratio_identity_check,
    ratio_R,
    sup_difference,
)
from config import (
    DEFAULT_LR_MAX,
    DEFAULT_LR_MIN,
    MAX_SEED,
    RATIO_IDENTITY_MAX_ABS_X,
    ScheduleKind,
    experiment_config_to_dict,
    load_experiment_config,
    load_sweep_config,
)
from errors import ConfigurationError, HTDError
from harness import metrics_to_csv, run_experiment, run_sweep, sweep_to_csv, write_text
from logger_config import get_logger, setup_logging
from schedulers import (
    Constant,
    Cosine,
    ExponentialDecay,
    Htd,
    ScheduleSpec,
    TwoStageExponential,
    curve,
    curve_to_csv,
    describe,
    final_rate,
    format_number,
    parse_kind,
    parse_schedule_arg,
)
from version import __description__, __version__

logger = get_logger()

SCHEDULE_HELP = """\
schedule arguments:
  --schedule takes either a kind (step, exp, two_stage, cosine, htd, constant)
  combined with the long flags below, or the compact form <kind>:<params>:
    step:0=0.1,81=0.01,122=0.001     exp:LR0,LAMBDA
    two_stage:LR0,L1,L2,SWITCH       cosine:LR_MIN,LR_MAX[,T]
    htd:L,U,LR_MIN,LR_MAX[,T]        constant:RATE
  T defaults to --epochs.
"""


class HelpFormatter(argparse.ArgumentDefaultsHelpFormatter, argparse.RawDescriptionHelpFormatter):
    """Show defaults for every flag and keep the epilog layout."""


def _seed(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid seed {text!r}")
    if not 0 <= value <= MAX_SEED:
        raise argparse.ArgumentTypeError(f"seed must lie in [0, 2**64 - 1], got {value}")
    return value


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid positive integer {text!r}")
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value}")
    return value


def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--log-level",
        type=str,
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        default="WARNING",
        help="Logging level",
    )
    common.add_argument("--log-file", type=str, metavar="PATH", help="Optional log file path")
    return common


def _add_schedule_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("schedule")
    group.add_argument("--schedule", type=str, required=True, metavar="KIND[:PARAMS]",
                       help="Schedule kind or compact <kind>:<params> form")
    group.add_argument("--L", type=float, metavar="FLOAT", help="HTD lower bound L <= 0")
    group.add_argument("--U", type=float, metavar="FLOAT", help="HTD upper bound U > 0")
    group.add_argument("--lr-min", type=float, default=DEFAULT_LR_MIN, metavar="FLOAT",
                       help="Minimum rate (cosine, htd)")
    group.add_argument("--lr-max", type=float, default=DEFAULT_LR_MAX, metavar="FLOAT",
                       help="Maximum rate (cosine, htd)")
    group.add_argument("--lr0", type=float, default=DEFAULT_LR_MAX, metavar="FLOAT",
                       help="Initial rate (exp, two_stage)")
    group.add_argument("--lambda", dest="decay", type=float, metavar="FLOAT", help="Decay factor (exp)")
    group.add_argument("--lambda1", type=float, metavar="FLOAT", help="First-stage factor (two_stage)")
    group.add_argument("--lambda2", type=float, metavar="FLOAT", help="Second-stage factor (two_stage)")
    group.add_argument("--switch-epoch", type=int, metavar="INT", help="Stage switch epoch (two_stage)")
    group.add_argument("--milestones", type=str, metavar="START=RATE,...",
                       help="Step milestones, e.g. 0=0.1,81=0.01,122=0.001")
    group.add_argument("--rate", type=float, metavar="FLOAT", help="Rate (constant)")


def build_parser() -> argparse.ArgumentParser:
    """Build the argument parser with all subcommands."""
    parser = argparse.ArgumentParser(
        prog="htd",
        description=__description__,
        formatter_class=HelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"HTD LR Scheduler v{__version__}")
    common = _common_parser()
    subparsers = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    curve_parser = subparsers.add_parser(
        "curve", parents=[common], formatter_class=HelpFormatter,
        help="Sample a schedule as t,lr CSV", epilog=SCHEDULE_HELP,
    )
    _add_schedule_flags(curve_parser)
    curve_parser.add_argument("--epochs", type=_positive_int, required=True, metavar="INT",
                              help="Horizon T (required)")
    curve_parser.add_argument("--out", type=str, metavar="PATH", help="Output CSV")
    curve_parser.add_argument("--quiet", action="store_true", help="Skip the console summary")

    ratio_parser = subparsers.add_parser(
        "ratio", parents=[common], formatter_class=HelpFormatter, help="Decreasing ratio r(x, delta)"
    )
    ratio_parser.add_argument("--x", type=float, required=True, metavar="FLOAT", help="Position x")
    ratio_parser.add_argument("--delta", type=float, required=True, metavar="FLOAT", help="Displacement delta > 0")

    diff_parser = subparsers.add_parser(
        "diff", parents=[common], formatter_class=HelpFormatter,
        help="Sup-norm distance between two schedules", epilog=SCHEDULE_HELP,
    )
    diff_parser.add_argument("--a", type=str, required=True, metavar="KIND:PARAMS", help="First schedule")
    diff_parser.add_argument("--b", type=str, required=True, metavar="KIND:PARAMS", help="Second schedule")
    diff_parser.add_argument("--epochs", type=_positive_int, metavar="INT",
                             help="Horizon T for schedules that omit it")
    diff_parser.add_argument("--grid", type=int, default=10001, metavar="INT",
                             help="Number of grid points")
    diff_parser.add_argument("--out", type=str, metavar="PATH", help="Output CSV")
    diff_parser.add_argument("--quiet", action="store_true", help="Skip the console table")

    train_parser = subparsers.add_parser(
        "train", parents=[common], formatter_class=HelpFormatter, help="Run one experiment"
    )
    train_parser.add_argument("--config", type=str, required=True, metavar="PATH", help="Experiment JSON")
    train_parser.add_argument("--seed", type=_seed, required=True, metavar="INT",
                              help="Experiment seed (overrides the config)")
    train_parser.add_argument("--out", type=str, metavar="PATH", help="Metrics CSV")
    train_parser.add_argument("--quiet", action="store_true", help="Skip the console table")

    sweep_parser = subparsers.add_parser(
        "sweep", parents=[common], formatter_class=HelpFormatter, help="Run a sweep"
    )
    sweep_parser.add_argument("--config", type=str, required=True, metavar="PATH", help="Sweep JSON")
    sweep_parser.add_argument("--seed", type=_seed, required=True, metavar="INT",
                              help="Base seed (overrides the config)")
    sweep_parser.add_argument("--workers", type=_positive_int, default=1, metavar="INT",
                              help="Parallel worker processes")
    sweep_parser.add_argument("--out", type=str, metavar="PATH", help="Sweep CSV")
    sweep_parser.add_argument("--quiet", action="store_true", help="Skip the console table")

    check_parser = subparsers.add_parser(
        "check", parents=[common], formatter_class=HelpFormatter,
        help="Final rates and inflection geometry of HTD(-R*U, U)",
    )
    check_parser.add_argument("--ratio", type=float, default=2.0, metavar="FLOAT", help="R = |L|/U")
    check_parser.add_argument("--uppers", type=str, default="2,3,4", metavar="U,...", help="Upper bounds U")
    check_parser.add_argument("--lr-min", type=float, default=DEFAULT_LR_MIN, metavar="FLOAT", help="Minimum rate")
    check_parser.add_argument("--lr-max", type=float, default=DEFAULT_LR_MAX, metavar="FLOAT", help="Maximum rate")
    check_parser.add_argument("--epochs", type=_positive_int, default=200, metavar="INT", help="Horizon T")
    check_parser.add_argument("--out", type=str, metavar="PATH", help="Output CSV")

    return parser


def parse_arguments(argv: Optional[list[str]] = None) -> argparse.Namespace:
    """Parse command line arguments.

    Returns:
        Parsed arguments namespace
    """
    return build_parser().parse_args(argv)


def _require(parser: argparse.ArgumentParser, args: argparse.Namespace, dest: str, flag: str, kind: str):
    value = getattr(args, dest)
    if value is None:
        parser.error(f"{flag} is required for --schedule {kind}")
    return value


def schedule_from_args(parser: argparse.ArgumentParser, args: argparse.Namespace) -> ScheduleSpec:
    """Resolve --schedule plus long flags into a ScheduleSpec; usage errors exit 2."""
    horizon = args.epochs
    try:
        if ":" in args.schedule:
            return parse_schedule_arg(args.schedule, horizon)

        kind = parse_kind(args.schedule)
        if kind is ScheduleKind.HTD:
            return Htd(_require(parser, args, "L", "--L", "htd"), _require(parser, args, "U", "--U", "htd"),
                       args.lr_min, args.lr_max, horizon)
        if kind is ScheduleKind.COSINE:
            return Cosine(args.lr_min, args.lr_max, horizon)
        if kind is ScheduleKind.EXPONENTIAL:
            return ExponentialDecay(args.lr0, _require(parser, args, "decay", "--lambda", "exp"))
        if kind is ScheduleKind.TWO_STAGE:
            return TwoStageExponential(
                args.lr0,
                _require(parser, args, "lambda1", "--lambda1", "two_stage"),
                _require(parser, args, "lambda2", "--lambda2", "two_stage"),
                _require(parser, args, "switch_epoch", "--switch-epoch", "two_stage"),
            )
        if kind is ScheduleKind.CONSTANT:
            return Constant(_require(parser, args, "rate", "--rate", "constant"))
        milestones = _require(parser, args, "milestones", "--milestones", "step")
        return parse_schedule_arg(f"step:{milestones}")
    except ConfigurationError as e:
        parser.error(f"--schedule: {e}")


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        path = write_text(text, out)
        logger.info(f"Wrote {path}")
    else:
        sys.stdout.write(text)


def _cmd_curve(parser: argparse.ArgumentParser, args: argparse.Namespace) -> None:
    spec = schedule_from_args(parser, args)
    lr_curve = curve(spec, args.epochs)
    _emit(curve_to_csv(lr_curve), args.out)
    if not args.quiet:
        from reporting import show_curve_summary
        show_curve_summary(spec, lr_curve)


def _cmd_ratio(parser: argparse.ArgumentParser, args: argparse.Namespace) -> None:
    try:
        query = RatioQuery(args.x, args.delta)
    except ConfigurationError as e:
        parser.error(str(e))
    sys.stdout.write(f"{format_number(decreasing_ratio(query))}\n")
    if abs(query.x) <= RATIO_IDENTITY_MAX_ABS_X:
        logger.info(f"identity residual between expanded and closed forms: {ratio_identity_check(query):.3e}")


def _cmd_diff(parser: argparse.ArgumentParser, args: argparse.Namespace) -> None:
    try:
        spec_a = parse_schedule_arg(args.a, args.epochs)
        spec_b = parse_schedule_arg(args.b, args.epochs)
    except ConfigurationError as e:
        parser.error(f"--a/--b: {e}")
    if args.grid < 2:
        parser.error("--grid must be at least 2")

    report = sup_difference(spec_a, spec_b, args.grid, horizon=args.epochs)
    _emit(proximity_to_csv(report), args.out)
    if not args.quiet:
        from reporting import show_proximity
        show_proximity(report, describe(spec_a), describe(spec_b))


def _cmd_train(parser: argparse.ArgumentParser, args: argparse.Namespace) -> None:
    cfg = replace(load_experiment_config(args.config), seed=args.seed)
    logger.debug(f"Effective config: {json.dumps(experiment_config_to_dict(cfg))}")
    records = run_experiment(cfg)
    _emit(metrics_to_csv(records), args.out)
    if not args.quiet:
        from reporting import show_metrics
        show_metrics(records)


def _cmd_sweep(parser: argparse.ArgumentParser, args: argparse.Namespace) -> None:
    sweep = load_sweep_config(args.config)
    sweep = replace(sweep, base=replace(sweep.base, seed=args.seed))
    rows = run_sweep(sweep, workers=args.workers)
    _emit(sweep_to_csv(rows), args.out)
    if not args.quiet:
        from reporting import show_sweep
        show_sweep(rows)


def _cmd_check(parser: argparse.ArgumentParser, args: argparse.Namespace) -> None:
    try:
        uppers = [float(u) for u in args.uppers.split(",") if u.strip()]
    except ValueError:
        parser.error(f"--uppers: malformed list {args.uppers!r}")

    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["L", "U", "R", "inflection_fraction", "final_rate"])
    for upper in uppers:
        lower = -args.ratio * upper
        spec = Htd(lower, upper, args.lr_min, args.lr_max, args.epochs)
        writer.writerow([
            format_number(lower),
            format_number(upper),
            format_number(ratio_R(lower, upper)),
            format_number(inflection_fraction(lower, upper)),
            format_number(final_rate(spec, args.epochs)),
        ])
    _emit(buffer.getvalue(), args.out)


COMMANDS = {
    "curve": _cmd_curve,
    "ratio": _cmd_ratio,
    "diff": _cmd_diff,
    "train": _cmd_train,
    "sweep": _cmd_sweep,
    "check": _cmd_check,
}


def main(argv: Optional[list[str]] = None) -> int:
    """Main entry point; returns the process exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    setup_logging(level=getattr(logging, args.log_level), log_file=args.log_file)
    logger.info(f"HTD LR Scheduler v{__version__}: {args.command}")

    try:
        COMMANDS[args.command](parser, args)
        return 0

    except SystemExit as e:
        # parser.error() raised inside a command
        return int(e.code or 0)

    except (HTDError, OSError) as e:
        from reporting import show_error
        show_error(str(e))
        logger.debug("Command failed", exc_info=True)
        return 1

    except KeyboardInterrupt:
        logger.warning("Operation cancelled by user")
        return 130


if __name__ == "__main__":
    sys.exit(main())
