"""
Command-line interface: ``solve``, ``sweep``, ``simulate`` and
``welfare``. Data goes to stdout as CSV or JSON, diagnostics to stderr.

Exit codes: 0 on success, 1 on a domain failure, 2 on argument errors.
"""

import argparse
import csv
import itertools
import json
import logging
import os
import sys
from typing import Dict, Iterable, List, Optional, Sequence, TextIO, Tuple

from matching_chains._conversions import NumberConversion, StateConversion
from matching_chains._utils import (
    format_number,
    parse_grid,
    parse_int_list,
    total_variation,
)
from matching_chains._version import __version__
from matching_chains.core import (
    ChainKind,
    Method,
    StationaryDistribution,
    ThresholdConfig,
    WelfareParams,
    canonical_composition,
)
from matching_chains.exceptions import MatchingChainError, PreconditionError
from matching_chains.metrics import threshold_sweep
from matching_chains.montecarlo import simulate
from matching_chains.solve import exact_stationary

__all__ = (
    "FORMAT_ENV",
    "FORMATS",
    "build_parser",
    "cmd_solve",
    "cmd_sweep",
    "cmd_simulate",
    "cmd_welfare",
    "main",
)

logger = logging.getLogger(__name__)

FORMAT_ENV = "MATCHING_CHAINS_FORMAT"
FORMATS = ("csv", "json")

_METHODS = {
    "direct": Method.DIRECT,
    "power": Method.POWER,
    "closed-form": Method.CLOSED_FORM,
}

Row = Dict[str, object]
Table = Tuple[List[Row], Dict[str, object]]


def _probability(text: str) -> float:
    value = float(text)
    if not 0.0 < value < 1.0:
        raise argparse.ArgumentTypeError(
            "p must lie strictly between 0 and 1, got {0}".format(text)
        )
    return value


def _non_negative(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError("must be non-negative")
    return value


def _threshold(text: str) -> int:
    try:
        number = float(text) if "." in text else int(text)
        return NumberConversion.as_threshold(number)
    except (TypeError, OverflowError, ValueError) as error:
        raise argparse.ArgumentTypeError(str(error)) from None


def _positive(text: str) -> int:
    value = int(text)
    if value <= 0:
        raise argparse.ArgumentTypeError("must be positive")
    return value


def _grid(text: str) -> List[float]:
    try:
        return parse_grid(text)
    except ValueError as error:
        raise argparse.ArgumentTypeError(str(error)) from None


def _int_list(text: str) -> List[int]:
    try:
        return [NumberConversion.as_threshold(value)
                for value in parse_int_list(text)]
    except ValueError as error:
        raise argparse.ArgumentTypeError(str(error)) from None


def _utility(text: str) -> Tuple[str, float]:
    composition, sep, value = text.partition("=")
    if not sep or not composition:
        raise argparse.ArgumentTypeError(
            "utilities are written COMP=VALUE, got {0!r}".format(text)
        )
    return canonical_composition(composition), float(value)


def _default_format() -> str:
    value = os.getenv(FORMAT_ENV, "csv").strip().lower()
    if value not in FORMATS:
        logger.warning(
            "%s=%r is not one of %s; using csv", FORMAT_ENV, value, FORMATS
        )
        return "csv"
    return value


def _common_options(parser: argparse.ArgumentParser, default) -> None:
    parser.add_argument(
        "-v", "--verbose", action="store_true", default=default,
        help="log debug messages to stderr",
    )
    parser.add_argument(
        "--format", choices=FORMATS, default=default,
        help="output format (default: ${0} or csv)".format(FORMAT_ENV),
    )


def _threshold_options(parser: argparse.ArgumentParser, kind: ChainKind,
                       lists: bool) -> None:
    if kind is ChainKind.DISASSORTATIVE:
        names = ("kh", "kl")
    else:
        names = ("kbar",)
    for name in names:
        if lists:
            group = parser.add_mutually_exclusive_group(required=True)
            group.add_argument(
                "--" + name, type=_threshold, dest=name + "_single"
            )
            group.add_argument(
                "--{0}-list".format(name), type=_int_list, dest=name
            )
        else:
            parser.add_argument("--" + name, type=_threshold, required=True)


def _probability_options(parser: argparse.ArgumentParser,
                         grid: bool) -> None:
    if grid:
        group = parser.add_mutually_exclusive_group(required=True)
        group.add_argument("--p", type=_probability, dest="p_single")
        group.add_argument("--p-grid", type=_grid, dest="p")
    else:
        parser.add_argument("--p", type=_probability, required=True)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="matching-chains",
        description="Stationary analysis of threshold matching markets",
    )
    parser.add_argument(
        "--version", action="version",
        version="%(prog)s {0}".format(__version__),
    )
    _common_options(parser, None)
    common = argparse.ArgumentParser(add_help=False)
    _common_options(common, argparse.SUPPRESS)
    commands = parser.add_subparsers(dest="command", required=True)

    for command, handler, summary in (
        ("solve", cmd_solve, "stationary law of one chain"),
        ("sweep", cmd_sweep, "stationary laws over p and threshold grids"),
        ("simulate", cmd_simulate, "full-market Monte Carlo run"),
        ("welfare", cmd_welfare, "welfare rate per threshold setting"),
    ):
        sub = commands.add_parser(command, help=summary)
        kinds = sub.add_subparsers(dest="kind_name", required=True)
        for kind in ChainKind:
            leaf = kinds.add_parser(kind.value, parents=[common])
            leaf.set_defaults(handler=handler, kind=kind)
            _threshold_options(
                leaf, kind, lists=command in ("sweep", "welfare")
            )
            _probability_options(leaf, grid=command == "sweep")
            if command in ("solve", "sweep"):
                leaf.add_argument(
                    "--method", choices=tuple(_METHODS), default="direct"
                )
                if kind is ChainKind.ASSORTATIVE:
                    leaf.add_argument(
                        "--lumped", action="store_true",
                        help="solve the chain lumped by population symmetry",
                    )
            elif command == "simulate":
                leaf.add_argument("--steps", type=_positive, required=True)
                leaf.add_argument("--seed", type=_non_negative, default=0)
                leaf.add_argument(
                    "--burn-in", type=_non_negative, default=None,
                    help="periods discarded first (default: 10%% of steps)",
                )
            else:
                leaf.add_argument(
                    "--cost", type=float, default=0.1,
                    help="waiting cost per agent and period",
                )
                leaf.add_argument(
                    "--utility", type=_utility, action="append", default=[],
                    metavar="COMP=VALUE",
                    help="override an example match utility",
                )
    return parser


def _resolve(args: argparse.Namespace) -> None:
    for name in ("kbar", "kh", "kl", "p"):
        single = getattr(args, name + "_single", None)
        if single is not None:
            setattr(args, name, [single])


def _threshold_settings(args: argparse.Namespace) -> List[ThresholdConfig]:
    kind = args.kind
    if kind is ChainKind.DISASSORTATIVE:
        kh = args.kh if isinstance(args.kh, list) else [args.kh]
        kl = args.kl if isinstance(args.kl, list) else [args.kl]
        return [
            ThresholdConfig(k_high=high, k_low=low)
            for high, low in itertools.product(kh, kl)
        ]
    kbar = args.kbar if isinstance(args.kbar, list) else [args.kbar]
    return [ThresholdConfig(k_bar=value) for value in kbar]


def _validate(parser: argparse.ArgumentParser,
              args: argparse.Namespace) -> None:
    _resolve(args)
    settings = _threshold_settings(args)
    for setting in settings:
        try:
            setting.require(args.kind)
        except PreconditionError as error:
            parser.error(str(error))
    method = getattr(args, "method", "direct")
    if (method == "closed-form" and args.kind is ChainKind.ASSORTATIVE
            and any(setting.k_bar != 2 for setting in settings)):
        parser.error("the assortative closed form exists for --kbar 2 only")
    if getattr(args, "steps", None) is not None:
        burn_in = args.steps // 10 if args.burn_in is None else args.burn_in
        if burn_in >= args.steps:
            parser.error("--burn-in must be smaller than --steps")
    if getattr(args, "cost", 0.0) < 0.0:
        parser.error("--cost must be non-negative")


def _state_rows(kind: ChainKind, p: float, setting: ThresholdConfig,
                dist: StationaryDistribution) -> List[Row]:
    base = {"p": p}
    base.update(setting.columns(kind))
    rows = []
    if dist.is_lumped:
        for index, (state, multiplicity, x, mass) in enumerate(zip(
                dist.states, dist.multiplicity, dist.per_state.tolist(),
                dist.probs.tolist())):
            row = dict(base, **{"class": index + 1})
            row.update(StateConversion.as_columns(state))
            row.update(multiplicity=multiplicity, pi_class=x, pi_weighted=mass)
            rows.append(row)
        return rows
    for state, mass in zip(dist.states, dist.probs.tolist()):
        row = dict(base)
        row.update(StateConversion.as_columns(state))
        row["pi"] = mass
        rows.append(row)
    return rows


def _solve_rows(args: argparse.Namespace,
                probabilities: Iterable[float]) -> Table:
    method = _METHODS[args.method]
    lumped = getattr(args, "lumped", False)
    rows = []
    residual = 0.0
    for p in probabilities:
        for setting in _threshold_settings(args):
            _, dist = exact_stationary(
                args.kind, p, setting, lumped=lumped, method=method
            )
            residual = max(residual, dist.residual)
            rows.extend(_state_rows(args.kind, p, setting, dist))
    meta = {
        "method": method.value,
        "residual": residual,
        "version": __version__,
    }
    return rows, meta


def cmd_solve(args: argparse.Namespace) -> Table:
    return _solve_rows(args, [args.p])


def cmd_sweep(args: argparse.Namespace) -> Table:
    # grid-major, then thresholds, then states
    return _solve_rows(args, args.p)


def cmd_simulate(args: argparse.Namespace) -> Table:
    setting, = _threshold_settings(args)
    report = simulate(
        args.kind, args.p, setting, steps=args.steps,
        burn_in=args.burn_in, seed=args.seed,
    )
    _, exact = exact_stationary(args.kind, args.p, setting)
    rows = []
    for state, visits, empirical, mass in zip(
            exact.states,
            (report.occupancy.get(state, 0) for state in exact.states),
            report.empirical.probs.tolist(),
            exact.probs.tolist()):
        row = {"p": args.p}
        row.update(setting.columns(args.kind))
        row.update(StateConversion.as_columns(state))
        row.update(visits=visits, pi_empirical=empirical, pi_exact=mass)
        rows.append(row)
    meta = {
        "method": Method.EMPIRICAL.value,
        "steps": report.steps,
        "burn_in": report.burn_in,
        "seed": report.seed,
        "tv": total_variation(report.empirical.probs, exact.probs),
        "forced_teams": report.forced_teams,
        "team_counts": dict(sorted(report.team_counts.items())),
        "version": __version__,
    }
    return rows, meta


def cmd_welfare(args: argparse.Namespace) -> Table:
    welfare = WelfareParams.example(args.kind, args.cost)
    if args.utility:
        utilities = dict(welfare.match_utilities)
        utilities.update(args.utility)
        welfare = WelfareParams(utilities, args.cost)
    try:
        welfare.validate(args.kind)
    except PreconditionError as error:
        logger.warning("utilities break the %s ordering: %s", args.kind, error)
    sweep = threshold_sweep(
        args.kind, args.p, _threshold_settings(args), welfare
    )
    rows = []
    for row in sweep:
        record = {"p": args.p}
        record.update(row.thresholds.columns(args.kind))
        record.update(
            welfare_rate=row.welfare_rate,
            mean_total_waiting=row.mean_total_waiting,
            best=int(row.is_best),
        )
        rows.append(record)
    meta = {
        "cost": welfare.waiting_cost,
        "utilities": dict(sorted(welfare.match_utilities.items())),
        "version": __version__,
    }
    return rows, meta


def _cell(value) -> str:
    if isinstance(value, float):
        return format_number(value)
    return str(value)


def _meta_cell(value) -> str:
    if isinstance(value, dict):
        return ";".join(
            "{0}:{1}".format(key, _cell(item)) for key, item in value.items()
        )
    return _cell(value)


def emit(rows: Sequence[Row], meta: Dict[str, object], fmt: str,
         stream: TextIO) -> None:
    """
    Write a table as CSV with ``# key=value`` footers, or as JSON
    ``{"meta": ..., "rows": [...]}``
    """
    if fmt == "json":
        json.dump({"meta": meta, "rows": list(rows)}, stream, indent=2)
        stream.write("\n")
        return
    writer = csv.writer(stream, lineterminator="\n")
    if rows:
        writer.writerow(list(rows[0]))
    for row in rows:
        writer.writerow([_cell(value) for value in row.values()])
    for key, value in meta.items():
        stream.write("# {0}={1}\n".format(key, _meta_cell(value)))


def main(argv: Optional[Sequence[str]] = None,
         stream: Optional[TextIO] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(
            level=logging.DEBUG if args.verbose else logging.WARNING,
            format="%(levelname)s %(name)s: %(message)s",
            stream=sys.stderr,
            force=True,
        )
        _validate(parser, args)
    except SystemExit as stop:
        return stop.code
    fmt = args.format or _default_format()
    try:
        rows, meta = args.handler(args)
    except MatchingChainError as error:
        logger.error("%s failed: %s", args.command, error)
        return 1
    emit(rows, meta, fmt, sys.stdout if stream is None else stream)
    return 0
