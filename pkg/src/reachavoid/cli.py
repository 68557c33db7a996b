"""
Command line entry point.

    reachavoid simulate <config>      play one game and write its trace
    reachavoid bench [<spec>]         run a batch of randomized games
    reachavoid srs <config>           plot a safe-reachable set at t = 0
    reachavoid verify <config>        run the invariant suite on one scenario

Exit status is 0 on success, 1 when an invariant check fails and 2 on a
configuration error.
"""
from __future__ import annotations

import argparse
import logging
import sys
import typing as t
from pathlib import Path

from rich.console import Console
from rich.table import Table

from reachavoid.config import load_bench, load_scenario
from reachavoid.engine import (
    AttackPolicy,
    DefensePolicy,
    TraceSummary,
    run_game,
    write_trace_csv,
    write_trace_summary,
)
from reachavoid.exceptions import ConfigurationError, ReachAvoidException
from reachavoid.run_config import RunConfig
from reachavoid.utils import get_debug_mode, patch_logger

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2


def _common(parser: argparse.ArgumentParser, batch: bool = False) -> None:
    parser.add_argument("--seed", type=int, help="scenario / random attacker seed")
    parser.add_argument("--out-dir", type=Path, help="directory for traces and summaries")
    parser.add_argument("--dt", type=float, help="integration step in seconds")
    parser.add_argument("--alloc-period", type=float, help="seconds between allocation times")
    parser.add_argument("--t-max", type=float, help="game horizon in seconds")
    parser.add_argument(
        "--defense",
        choices=[p.value for p in DefensePolicy],
        action="append" if batch else "store",
        help="defense policy" + (" (repeatable)" if batch else ""),
    )
    parser.add_argument(
        "--attack",
        choices=[p.value for p in AttackPolicy],
        action="append" if batch else "store",
        help="attack policy" + (" (repeatable)" if batch else ""),
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="reachavoid",
        description="Multiplayer reach-avoid games with convex-program defense coordination.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress at INFO level")
    sub = parser.add_subparsers(dest="command", required=True)

    simulate = sub.add_parser("simulate", help="play one game")
    simulate.add_argument("config", type=Path)
    _common(simulate)

    bench = sub.add_parser("bench", help="run a batch of randomized games")
    bench.add_argument("spec", type=Path, nargs="?")
    bench.add_argument("--preset", help="scenario preset instead of a spec file")
    bench.add_argument("--trials", type=int)
    bench.add_argument("--workers", type=int, default=1)
    bench.add_argument("--plots", action="store_true", help="write SVG plots per trial")
    _common(bench, batch=True)

    srs = sub.add_parser("srs", help="plot an attacker's safe-reachable set at t = 0")
    srs.add_argument("config", type=Path)
    srs.add_argument("--attacker", type=int, default=1)
    srs.add_argument("--coalition", type=lambda s: [int(i) for i in s.split(",")], help="defender ids, e.g. 1,2")
    srs.add_argument("--out-dir", type=Path)

    verify = sub.add_parser("verify", help="run the invariant suite on one scenario")
    verify.add_argument("config", type=Path)
    verify.add_argument("--points", type=int, default=2000, help="sample points for the set checks")
    _common(verify)
    return parser


def _scenario(args: argparse.Namespace):
    config = load_scenario(args.config)
    return config.with_overrides(
        dt=args.dt, allocation_period=args.alloc_period, t_max=args.t_max, rng_seed=args.seed
    ).validate()


def _simulate(args: argparse.Namespace, console: Console) -> int:
    config = _scenario(args)
    trace = run_game(
        config,
        args.defense or DefensePolicy.MDEA,
        args.attack or AttackPolicy.OPTIMAL,
    )
    out = args.out_dir or Path("out")
    write_trace_csv(trace, out / "trace.csv")
    write_trace_summary(trace, out / "summary.json")

    summary = TraceSummary.from_trace(trace)
    table = Table("Metric", "Value", title=f"{args.config.name}")
    for key in ("outcome", "payoff", "captures", "timeouts", "termination_reason", "steps", "average_check_number", "guaranteed_bound"):
        table.add_row(key, str(getattr(summary, key)))
    console.print(table)

    ok = trace.conservation_holds() and trace.frozen_agents_hold()
    if trace.defense_policy is DefensePolicy.MDEA:
        bound = trace.guaranteed_bound
        ok = ok and trace.monotone_gamma() and (bound is None or trace.payoff <= bound)
    return EXIT_OK if ok else EXIT_CHECK_FAILED


def _bench(args: argparse.Namespace, console: Console) -> int:
    from reachavoid.bench.runner import run_bench, summary_tables
    from reachavoid.bench.scenarios import BenchSpec, get_preset

    if (args.spec is None) == (args.preset is None):
        raise ConfigurationError("give exactly one of a spec file and --preset", "bench")
    spec = BenchSpec(template=get_preset(args.preset)) if args.preset else load_bench(args.spec)
    template = spec.template.with_overrides(dt=args.dt, allocation_period=args.alloc_period, t_max=args.t_max)
    spec = spec.with_overrides(
        template=template,
        trials=args.trials,
        seed=args.seed,
        out_dir=str(args.out_dir) if args.out_dir else None,
        defense_policies=tuple(args.defense) if args.defense else None,
        attack_policies=tuple(args.attack) if args.attack else None,
        emit_plots=True if args.plots else None,
    ).validate()

    summary = run_bench(spec, RunConfig(max_workers=max(1, args.workers)))
    for table in summary_tables(summary):
        console.print(table)
    failed = summary.errors or any(
        tally.check_bound_violations or any(s < 0 for s in tally.bound_slacks) for tally in summary.tallies
    )
    return EXIT_CHECK_FAILED if failed else EXIT_OK


def _srs(args: argparse.Namespace, console: Console) -> int:
    from reachavoid.bench.plotting import emit_srs_plot, write_srs_point_cloud

    config = load_scenario(args.config)
    out = args.out_dir or Path("out")
    if config.dimension == 2:
        path = emit_srs_plot(config, args.attacker, args.coalition, out / f"srs-attacker{args.attacker}.svg")
    else:
        path = write_srs_point_cloud(config, args.attacker, args.coalition, out / f"srs-attacker{args.attacker}.csv")
    console.print(f"wrote {path}")
    return EXIT_OK


def _verify(args: argparse.Namespace, console: Console) -> int:
    from reachavoid.bench.verify import verify_scenario

    config = _scenario(args)
    report = verify_scenario(config, n_points=args.points, attack_policy=args.attack or AttackPolicy.OPTIMAL)
    console.print(report.table())
    return EXIT_OK if report.passed else EXIT_CHECK_FAILED


_COMMANDS: t.Dict[str, t.Callable[[argparse.Namespace, Console], int]] = {
    "simulate": _simulate,
    "bench": _bench,
    "srs": _srs,
    "verify": _verify,
}


def main(argv: t.Optional[t.Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if get_debug_mode():
        patch_logger("reachavoid", logging.DEBUG)
    elif args.verbose:
        patch_logger("reachavoid", logging.INFO)
    console = Console()
    try:
        return _COMMANDS[args.command](args, console)
    except ConfigurationError as e:
        console.print(f"[red]configuration error:[/red] {e.message}")
        return EXIT_CONFIG
    except ReachAvoidException as e:
        logger.error("%s failed", args.command, exc_info=True)
        console.print(f"[red]error:[/red] {e.message}")
        return EXIT_CHECK_FAILED


if __name__ == "__main__":
    sys.exit(main())
