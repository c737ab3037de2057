import argparse
import logging
import os
import shutil
import sys
from typing import List, Optional

from .analysis import EquilibriumConfig, TransferConfig, check_equilibrium, simulate, transfer
from .errors import BudgetExceeded, DelayGamesError, FormatError, PreconditionError
from .formats.codec import TraceWriter, dump_game, dump_profile, dump_report, load_game, load_profile, write_text
from .game import DelaySpace, lift_to_delayed, project_to_instant, unravel, validate
from .nature import parse_scheduler

logger = logging.getLogger("delaygames")

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_SYNTAX = 2
EXIT_INCONCLUSIVE = 3
EXIT_DEVIATION = 4
EXIT_BUDGET = 5

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


def _configure_logging(verbosity: int) -> None:
    if verbosity:
        level = max(logging.DEBUG, logging.WARNING - 10 * verbosity)
    else:
        level = os.environ.get("DELAYGAMES_LOG_LEVEL", "WARNING").upper()
    logging.basicConfig(level=level, format=LOG_FORMAT, stream=sys.stderr, force=True)


def _clip(text: str, width: int) -> str:
    return text if len(text) <= width else text[: width - 1] + "…"


def _print_table(rows, headers, min_width: int = 6):
    """One row per player; the widest columns are clipped until the table fits the terminal."""
    cells = [[str(c) for c in headers]] + [["" if c is None else str(c) for c in row] for row in rows]
    widths = [max(len(row[i]) for row in cells) for i in range(len(headers))]
    room = shutil.get_terminal_size(fallback=(120, 20)).columns - 3 * (len(widths) - 1)
    while sum(widths) > room and max(widths) > min_width:
        widths[widths.index(max(widths))] -= 1
    lines = [" | ".join(_clip(c, w).ljust(w) for c, w in zip(row, widths)) for row in cells]
    lines.insert(1, "-+-".join("-" * w for w in widths))
    print("\n".join(lines))


def _flag(value) -> str:
    if value is None:
        return "unchecked"
    return "ok" if value else "failed"


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value}")
    return value


def cmd_validate(args) -> int:
    g = load_game(args.game)
    violations = validate(g)
    for v in violations:
        print(f"{v.kind}: {v}")
    if violations:
        print(f"{len(violations)} violation(s)")
        return EXIT_INVALID
    print(f"ok: {len(g.states)} states, {len(g.transitions)} transitions, {g.mode.value} monitoring")
    return EXIT_OK


def cmd_transform(args) -> int:
    g = load_game(args.game)
    if args.unravel is not None:
        out = unravel(g, args.unravel)
    elif args.lift is not None:
        out = lift_to_delayed(g, DelaySpace.parse(args.lift, g.n_players))
    else:
        out = project_to_instant(g)
    text = dump_game(out)
    if args.output:
        write_text(args.output, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_simulate(args) -> int:
    g = load_game(args.game)
    profile = load_profile(args.profile)
    sched = None
    if g.is_delayed:
        if not args.scheduler:
            raise PreconditionError("a delayed-monitoring game needs --scheduler")
        sched = parse_scheduler(args.scheduler, g.delay_space)
    elif args.scheduler:
        logger.debug(f"Ignoring scheduler {args.scheduler!r} on an instant-monitoring game")

    if args.trace:
        with open(args.trace, "w") as stream:
            result = simulate(g, profile, sched, args.horizon, listener=TraceWriter(stream))
    else:
        result = simulate(g, profile, sched, args.horizon)

    print("payoffs: " + ", ".join(str(p) for p in result.payoffs))
    if result.lasso is not None:
        print(f"lasso: prefix {result.lasso[0]}, cycle {result.lasso[1]}")
    else:
        print(f"lasso: none within {args.horizon} periods")
    print(f"periods: {len(result)}")
    return EXIT_OK


def cmd_transfer(args) -> int:
    g = load_game(args.game)
    profile = load_profile(args.profile)
    d = DelaySpace.parse(args.delays, g.n_players)
    config = TransferConfig.from_env(
        horizon=args.horizon,
        exhaustive_horizon=args.exhaustive_horizon,
        scheduler_budget=args.schedulers,
        random_schedulers=args.random_schedulers,
        random_period=args.random_period,
        seed=args.seed,
        jobs=args.jobs,
    )
    config.check_equivalence = not args.no_equivalence
    if args.trace:
        with open(args.trace, "w") as stream:
            writer = TraceWriter(stream)
            outcome = transfer(
                g, profile, d, modulus=args.modulus, config=config, listener=writer, traced_run=args.trace_run
            )
        logger.info(f"Wrote {writer.count} thread records of run {args.trace_run} to {args.trace}")
    else:
        outcome = transfer(g, profile, d, modulus=args.modulus, config=config)
    report = outcome.report

    if args.out_game:
        write_text(args.out_game, dump_game(outcome.game))
    if args.out_profile:
        write_text(args.out_profile, dump_profile(outcome.profile))
    if args.report:
        write_text(args.report, dump_report(report))

    rows = [
        [g.players[i].name, report.instant_payoffs[i], report.delayed_payoffs[i], _flag(report.equal[i])]
        for i in range(g.n_players)
    ]
    _print_table(rows, ["Player", "Instant", "Delayed", "Equal"])
    print(f"\nmodulus: {report.modulus}")
    print(f"runs: {report.runs}")
    print(f"assertions: {_flag(report.assertion_safe)}")
    print(f"shuffle: {_flag(report.shuffle_ok)}")
    print(f"equivalence: {_flag(report.equivalence_ok)}")
    print(f"submixing: {_flag(report.submixing_ok)}")
    print(f"ergodic: {'yes' if report.ergodic else 'no'}")
    for failure in report.failures:
        print(f"failure: {failure}")
    print(f"verdict: {report.verdict}")
    if report.verdict == "ok":
        return EXIT_OK
    return EXIT_INCONCLUSIVE if report.verdict == "inconclusive" else EXIT_INVALID


def cmd_check(args) -> int:
    g = load_game(args.game)
    profile = load_profile(args.profile)
    config = EquilibriumConfig(
        deviator_memory=args.deviator_memory,
        horizon=args.horizon,
        scheduler_budget=args.schedulers,
        max_deviators=args.max_deviators,
        search_depth=args.search_depth,
        seed=args.seed,
    )
    report = check_equilibrium(g, profile, config)
    if args.report:
        write_text(args.report, dump_report(report))

    print("baseline: " + ", ".join(str(p) for p in report.baseline))
    rows = [
        [g.players[d.player].name, d.strategy.name, d.payoff, d.baseline, d.scheduler or "-"]
        for d in report.deviations
        if d is not None
    ]
    if rows:
        _print_table(rows, ["Player", "Deviation", "Payoff", "Baseline", "Scheduler"])
    print(f"deviators evaluated: {report.evaluated}")
    if report.budget_exceeded:
        print("budget: exceeded, report is partial")
    print(f"verdict: {report.verdict}")
    if any(report.deviations):
        return EXIT_DEVIATION
    return EXIT_BUDGET if report.budget_exceeded else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="delaygames", description="Concurrent games on graphs with instant and delayed monitoring"
    )
    parser.add_argument("-v", "--verbose", action="count", default=0, help="More logging (repeatable)")
    subparsers = parser.add_subparsers(dest="command", required=True)

    validate_parser = subparsers.add_parser("validate", help="Parse and validate a game file")
    validate_parser.add_argument("game", type=str, help="Game file")
    validate_parser.set_defaults(handler=cmd_validate)

    transform_parser = subparsers.add_parser("transform", help="Unravel, lift or project a game")
    transform_parser.add_argument("game", type=str, help="Game file")
    ops = transform_parser.add_mutually_exclusive_group(required=True)
    ops.add_argument("--unravel", type=_positive_int, metavar="M", help="Unravel with modulus M")
    ops.add_argument("--lift", type=str, metavar="DELAYS", help="Lift to delayed monitoring, e.g. 0,1 or 0,1;0")
    ops.add_argument("--project", action="store_true", help="Project a delayed game to instant monitoring")
    transform_parser.add_argument("-o", "--output", type=str, help="Output file (default: stdout)")
    transform_parser.set_defaults(handler=cmd_transform)

    sim_parser = subparsers.add_parser("simulate", help="Play a strategy profile")
    sim_parser.add_argument("game", type=str, help="Game file")
    sim_parser.add_argument("--profile", type=str, required=True, help="Strategy profile file")
    sim_parser.add_argument(
        "--scheduler", type=str, help="fixed:<d>, rr, seed:<n>[:<p>] or explicit:<path> (delayed games)"
    )
    sim_parser.add_argument("--horizon", type=_positive_int, default=100, help="Number of periods")
    sim_parser.add_argument("--trace", type=str, help="Write one JSON line per period to this file")
    sim_parser.set_defaults(handler=cmd_simulate)

    transfer_parser = subparsers.add_parser("transfer", help="Carry a profile over to delayed monitoring")
    transfer_parser.add_argument("game", type=str, help="Instant-monitoring game file")
    transfer_parser.add_argument("--profile", type=str, required=True, help="Strategy profile file")
    transfer_parser.add_argument("--delays", type=str, required=True, help="Delay sets, e.g. 0,1 or 0,1;0,2")
    transfer_parser.add_argument("--modulus", type=_positive_int, help="Force the unravelling modulus")
    transfer_parser.add_argument("--report", type=str, help="Write the JSON report here")
    transfer_parser.add_argument("--out-game", type=str, help="Write the delayed game here")
    transfer_parser.add_argument("--out-profile", type=str, help="Write the wrapped profile description here")
    transfer_parser.add_argument("--horizon", type=_positive_int, help="Periods per run (default 1000)")
    transfer_parser.add_argument("--exhaustive-horizon", type=int, help="Length of exhaustive scheduler heads")
    transfer_parser.add_argument("--schedulers", type=_positive_int, help="Exhaustive scheduler budget")
    transfer_parser.add_argument("--random-schedulers", type=int, help="Number of seeded random schedulers")
    transfer_parser.add_argument("--random-period", type=_positive_int, help="Block length of seeded schedulers")
    transfer_parser.add_argument("--seed", type=int, help="Base seed for random schedulers")
    transfer_parser.add_argument("--jobs", type=_positive_int, help="Parallel runs (default $DELAYGAMES_JOBS or 1)")
    transfer_parser.add_argument(
        "--trace", type=str, help="Write the thread schedule of one run, one JSON line per player and period"
    )
    transfer_parser.add_argument("--trace-run", type=int, default=0, help="Battery run to trace (default 0)")
    transfer_parser.add_argument(
        "--no-equivalence", action="store_true", help="Skip the full-history shadow run of every wrapped strategy"
    )
    transfer_parser.set_defaults(handler=cmd_transfer)

    check_parser = subparsers.add_parser("check", help="Search bounded deviations from a profile")
    check_parser.add_argument("game", type=str, help="Game file")
    check_parser.add_argument("--profile", type=str, required=True, help="Strategy profile file")
    check_parser.add_argument("--deviator-memory", type=_positive_int, default=1, help="Memory bound k")
    check_parser.add_argument("--horizon", type=_positive_int, default=200, help="Periods per simulation")
    check_parser.add_argument("--schedulers", type=_positive_int, default=16, help="Scheduler budget")
    check_parser.add_argument("--max-deviators", type=_positive_int, default=5000, help="Deviators per player")
    check_parser.add_argument("--search-depth", type=int, default=3, help="Longest open-loop action word")
    check_parser.add_argument("--seed", type=int, default=0, help="Seed for scheduler tails")
    check_parser.add_argument("--report", type=str, help="Write the JSON report here")
    check_parser.set_defaults(handler=cmd_check)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _configure_logging(args.verbose)
    try:
        return args.handler(args)
    except FormatError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_SYNTAX
    except BudgetExceeded as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_BUDGET
    except DelayGamesError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
