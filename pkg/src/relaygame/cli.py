"""Command-line front end.

Five subcommands:

* ``simulate``       — full layered run from a JSON config
* ``analyze-tables`` — stability / reachability study of utility tables
* ``demand-change``  — toggle traffic demands in a finished run and re-converge
* ``enumerate``      — list cooperation structures for M providers
* ``shapley``        — fair-division shares for an explicit worth table
"""

from __future__ import annotations

import argparse
import csv
import itertools
import sys
from pathlib import Path

from . import coalitions, radio, tables
from .allocation import SHAPLEY_PLAYER_CAP, shapley_from_table
from .config import example_config_path, load_config
from .coalitions import CoalitionStructure

__all__ = ["main", "build_parser"]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="relaygame",
        description="Layered coalition simulator for relay-assisted uplinks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run link formation plus coalition play")
    sim.add_argument(
        "--config",
        type=Path,
        default=None,
        help="JSON scenario config (defaults to the bundled example)",
    )
    sim.add_argument("--seed", type=int, default=None, help="override the config seed")
    sim.add_argument(
        "--coalition-cost",
        type=float,
        default=None,
        help="price per cooperation slot (default: value from the config)",
    )
    sim.add_argument(
        "--throughput-model",
        choices=sorted(radio.available_models()),
        default=None,
        help="how a relay path is scored",
    )
    sim.add_argument(
        "--move-ordering",
        choices=coalitions.MOVE_POLICIES,
        default="best",
        help="which admitted coalition move an acting provider takes",
    )
    sim.add_argument(
        "--split-rule",
        choices=coalitions.SPLIT_RULES,
        default="strict",
        help="whether splits need a strict gain",
    )
    sim.add_argument("--out", type=Path, required=True, help="output directory")
    sim.add_argument(
        "--no-figures", action="store_true", help="skip PNG rendering (DOT/CSV only)"
    )

    ana = sub.add_parser(
        "analyze-tables", help="stable sets and move graphs for utility tables"
    )
    ana.add_argument(
        "--fixture",
        action="append",
        choices=sorted(tables.FIXTURES),
        default=None,
        help="bundled table to analyze (repeatable)",
    )
    ana.add_argument(
        "--table",
        action="append",
        type=Path,
        default=None,
        help="external utilities.csv to analyze (repeatable)",
    )
    ana.add_argument(
        "--costs",
        default=None,
        help="comma list of name=price pairs enabling the price-slope check",
    )
    ana.add_argument(
        "--split-rule", choices=coalitions.SPLIT_RULES, default="strict"
    )
    ana.add_argument("--out", type=Path, required=True, help="output directory")
    ana.add_argument("--no-figures", action="store_true")

    dem = sub.add_parser(
        "demand-change", help="toggle devices in a finished simulate run"
    )
    dem.add_argument(
        "--report",
        type=Path,
        required=True,
        help="directory (or report.json) produced by simulate",
    )
    dem.add_argument(
        "--toggle",
        type=int,
        action="append",
        default=None,
        help="device id whose demand flips (repeatable; may be omitted)",
    )
    dem.add_argument("--throughput-model", default=None)
    dem.add_argument("--out", type=Path, required=True, help="output directory")
    dem.add_argument("--no-figures", action="store_true")

    enu = sub.add_parser("enumerate", help="list cooperation structures")
    enu.add_argument("--providers", type=int, required=True, help="provider count M")
    enu.add_argument(
        "--out", type=Path, default=None, help="optional structures.csv destination"
    )

    sha = sub.add_parser("shapley", help="fair shares for an explicit worth table")
    sha.add_argument(
        "--game",
        type=Path,
        required=True,
        help="CSV with columns coalition,value; coalitions written like 1+2",
    )
    sha.add_argument("--out", type=Path, default=None, help="optional CSV destination")

    return parser


def _cmd_simulate(args: argparse.Namespace) -> int:
    from .report import run_simulation, write_simulation_artifacts

    config_path = args.config or example_config_path()
    config = load_config(config_path)
    result = run_simulation(
        config,
        seed=args.seed,
        cost_per_slot=args.coalition_cost,
        throughput_model=args.throughput_model,
        move_ordering=args.move_ordering,
        split_rule=args.split_rule,
    )
    written = write_simulation_artifacts(result, args.out, figures=not args.no_figures)
    labels = result.labels
    print(f"config: {config_path}")
    print(f"seed: {result.config.seed if args.seed is None else args.seed}")
    print(
        f"structures priced: {len(result.structures)}"
        f" | coalition cost: {result.utilities.cost_per_slot}"
    )
    for move in result.trajectory:
        print(f"  {move.describe()}")
    final = result.final_structure
    print(f"final structure: {labels[final]} = {final.serialize()}")
    for path in written:
        print(f"wrote {path}")
    return 0


def _load_tables(args: argparse.Namespace) -> list[tables.TableUtilities]:
    loaded: list[tables.TableUtilities] = []
    for name in args.fixture or []:
        loaded.append(tables.fixture_table(name))
    for path in args.table or []:
        loaded.append(tables.read_utility_table(path))
    if not loaded:
        loaded = [tables.fixture_table(name) for name in sorted(tables.FIXTURES)]
    names = [t.name for t in loaded]
    if len(set(names)) != len(names):
        raise SystemExit(f"duplicate table names: {names}")
    return loaded


def _parse_costs(spec: str | None, loaded: list[tables.TableUtilities]) -> dict[str, float]:
    if spec is None:
        # fixtures carry known prices; use them when every table is a fixture
        prices: dict[str, float] = {}
        for table in loaded:
            if table.name in tables.FIXTURES:
                prices[table.name] = tables.fixture_cost(table.name)
            else:
                return {}
        return prices
    prices = {}
    for chunk in spec.split(","):
        name, _, price = chunk.partition("=")
        if not price:
            raise SystemExit(f"--costs entries look like name=price, got {chunk!r}")
        prices[name.strip()] = float(price)
    return prices


def _cmd_analyze(args: argparse.Namespace) -> int:
    from .report import analyze_table, write_analysis_artifacts

    loaded = _load_tables(args)
    prices = _parse_costs(args.costs, loaded)
    analyses = [analyze_table(t, split_rule=args.split_rule) for t in loaded]
    written = write_analysis_artifacts(
        analyses,
        args.out,
        prices=prices,
        figures=not args.no_figures,
        split_rule=args.split_rule,
    )
    for analysis in analyses:
        labels = analysis.labels
        stable = ", ".join(
            f"{labels[s]}={s.serialize()}" for s in analysis.stable
        ) or "(none)"
        print(f"{analysis.table.name}: stable structures: {stable}")
    for path in written:
        print(f"wrote {path}")
    return 0


def _cmd_demand_change(args: argparse.Namespace) -> int:
    from .report import (
        load_simulation_report,
        run_demand_change,
        write_demand_change_artifacts,
    )

    report = load_simulation_report(args.report)
    result = run_demand_change(report, args.toggle or [], model=args.throughput_model)
    written = write_demand_change_artifacts(
        result, args.out, figures=not args.no_figures
    )
    print(f"toggled devices: {list(result.toggled)}")
    print(f"re-convergence rounds: {result.rounds}")
    print(f"links added: {len(result.added)} | links removed: {len(result.removed)}")
    for path in written:
        print(f"wrote {path}")
    return 0


def _cmd_enumerate(args: argparse.Namespace) -> int:
    count = args.providers
    formula = coalitions.structure_count_formula(count)
    structures = coalitions.enumerate_structures(count)
    labels = coalitions.omega_labels(structures)
    print(f"providers: {count}")
    print(f"enumerated structures: {len(structures)} (closed-form count: {formula})")
    rows = [(labels[s], s.serialize()) for s in structures]
    for label, serial in rows:
        print(f"  {label}: {serial}")
    if args.out is not None:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        with args.out.open("w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(["label", "structure"])
            writer.writerows(rows)
        print(f"wrote {args.out}")
    return 0


def _read_game(path: Path) -> dict[frozenset[int], float]:
    values: dict[frozenset[int], float] = {}
    with path.open(newline="") as handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames is None or [
            f.strip() for f in reader.fieldnames
        ] != ["coalition", "value"]:
            raise SystemExit(
                f"{path}: expected header 'coalition,value', got {reader.fieldnames}"
            )
        for row in reader:
            members = frozenset(
                int(part) for part in row["coalition"].split("+") if part.strip()
            )
            if not members:
                raise SystemExit(f"{path}: empty coalition in row {row}")
            if members in values:
                raise SystemExit(f"{path}: duplicate coalition {row['coalition']}")
            values[members] = float(row["value"])
    return values


def _cmd_shapley(args: argparse.Namespace) -> int:
    values = _read_game(args.game)
    players = sorted(set().union(*values))
    if len(players) > SHAPLEY_PLAYER_CAP:
        raise SystemExit(
            f"{len(players)} players exceeds the exact-solver cap of {SHAPLEY_PLAYER_CAP}"
        )
    missing = [
        "+".join(str(m) for m in sorted(subset))
        for size in range(1, len(players) + 1)
        for subset in itertools.combinations(players, size)
        if frozenset(subset) not in values
    ]
    if missing:
        raise SystemExit(f"{args.game}: missing coalition rows: {', '.join(missing)}")
    shares = shapley_from_table(values, frozenset(players))
    total = values[frozenset(players)]
    for player in players:
        print(f"player {player}: {shares[player]:.6f}")
    print(f"total: {sum(shares.values()):.6f} (grand worth {total:.6f})")
    if args.out is not None:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        with args.out.open("w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(["player", "share"])
            for player in players:
                writer.writerow([player, repr(shares[player])])
        print(f"wrote {args.out}")
    return 0


_COMMANDS = {
    "simulate": _cmd_simulate,
    "analyze-tables": _cmd_analyze,
    "demand-change": _cmd_demand_change,
    "enumerate": _cmd_enumerate,
    "shapley": _cmd_shapley,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return _COMMANDS[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
