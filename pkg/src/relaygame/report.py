"""Run orchestration and artifact writing shared by the CLI commands.

Every data artifact (CSV, DOT, JSON report, PNG) is a pure function of the
configuration and seed, so re-running a command into a fresh directory yields
byte-identical files.  Wall-clock timings go to a separate ``timings.json``
sidecar to keep the data artifacts reproducible.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from . import coalitions, linkgame, tables
from .allocation import SimulatedUtilities
from .coalitions import CoalitionStructure, Move, TransitionGraph
from .config import RunConfig
from .linkgame import NetworkGraph
from .model import Node, Scenario, toggle_source

__all__ = [
    "SimulationResult",
    "TableAnalysis",
    "DemandChangeResult",
    "run_simulation",
    "write_simulation_artifacts",
    "analyze_table",
    "write_analysis_artifacts",
    "run_demand_change",
    "write_demand_change_artifacts",
    "load_simulation_report",
]


def _write_json(path: Path, payload: dict) -> Path:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return path


def _serialize_edges(graph: NetworkGraph) -> list[list]:
    return [[td_id, target.kind, target.id] for td_id, target in graph.edges()]


def _graph_from_edges(edges: Iterable[Sequence]) -> NetworkGraph:
    graph = NetworkGraph()
    for td_id, kind, node_id in edges:
        graph.set_link(int(td_id), Node(str(kind), int(node_id)))
    return graph


@dataclass
class Timer:
    marks: dict[str, float] = field(default_factory=dict)

    def time(self, label: str):
        timer = self

        class _Span:
            def __enter__(self):
                self.start = time.perf_counter()
                return self

            def __exit__(self, *exc):
                timer.marks[label] = timer.marks.get(label, 0.0) + (
                    time.perf_counter() - self.start
                )
                return False

        return _Span()

    def write(self, path: Path) -> Path:
        return _write_json(path, {"seconds": self.marks})


# ---------------------------------------------------------------------------
# simulate


@dataclass
class SimulationResult:
    config: RunConfig
    scenario: Scenario
    utilities: SimulatedUtilities
    structures: tuple[CoalitionStructure, ...]
    labels: dict[CoalitionStructure, str]
    final_structure: CoalitionStructure
    trajectory: list[Move]
    move_ordering: str
    split_rule: str
    timer: Timer


def run_simulation(
    config: RunConfig,
    *,
    seed: int | None = None,
    cost_per_slot: float | None = None,
    throughput_model: str | None = None,
    move_ordering: str = "best",
    split_rule: str = "strict",
) -> SimulationResult:
    """Full layered run: price every structure, then merge-and-split play."""
    timer = Timer()
    seed = config.seed if seed is None else seed
    model = throughput_model or config.throughput_model
    with timer.time("scenario"):
        scenario = config.scenario(seed)
    utilities = SimulatedUtilities(
        scenario, cost_per_slot=cost_per_slot, model=model, seed=seed
    )
    with timer.time("utility_matrix"):
        structures = coalitions.enumerate_structures(len(utilities.players))
        for structure in structures:
            utilities.shares(structure)
    with timer.time("coalition_play"):
        final, trajectory = coalitions.run_coalition_formation(
            utilities,
            config.initial_structure,
            policy=move_ordering,
            seed=seed,
            split_rule=split_rule,
        )
    return SimulationResult(
        config=config,
        scenario=scenario,
        utilities=utilities,
        structures=structures,
        labels=coalitions.omega_labels(structures),
        final_structure=final,
        trajectory=trajectory,
        move_ordering=move_ordering,
        split_rule=split_rule,
        timer=timer,
    )


def write_simulation_artifacts(
    result: SimulationResult, out_dir: str | Path, *, figures: bool = True
) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    utilities = result.utilities
    scenario = result.scenario

    matrix = [(s, utilities.shares(s)) for s in result.structures]
    csv_path = out / "utilities.csv"
    tables.write_utility_table(csv_path, utilities.players, matrix)
    written.append(csv_path)

    link_rounds: dict[str, int] = {}
    with result.timer.time("networks"):
        for structure in result.structures:
            graph, rounds = utilities.network_for(structure)
            link_rounds[structure.serialize()] = rounds
            dot_path = out / f"network_{result.labels[structure]}.dot"
            dot_path.write_text(
                linkgame.graph_to_dot(
                    scenario,
                    graph,
                    utilities.model,
                    title=f"network under {structure.serialize()}",
                )
            )
            written.append(dot_path)

    final_graph, _ = utilities.network_for(result.final_structure)
    final_dot = out / "network_final.dot"
    final_dot.write_text(
        linkgame.graph_to_dot(
            scenario,
            final_graph,
            utilities.model,
            title=f"converged network under {result.final_structure.serialize()}",
        )
    )
    written.append(final_dot)

    if figures:
        from . import figures as figs

        with result.timer.time("figures"):
            written.append(
                figs.plot_network(
                    scenario,
                    final_graph,
                    out / "network_final.png",
                    title=f"final network — structure {result.final_structure.serialize()}",
                )
            )

    report = {
        "command": "simulate",
        "seed": result.config.seed,
        "coalition_cost": utilities.cost_per_slot,
        "throughput_model": utilities.model.name,
        "move_ordering": result.move_ordering,
        "split_rule": result.split_rule,
        "config": result.config.raw,
        "initial_structure": result.config.initial_structure.serialize(),
        "final_structure": result.final_structure.serialize(),
        "structure_labels": {
            s.serialize(): label for s, label in result.labels.items()
        },
        "trajectory": [
            {
                "actor": move.actor,
                "kind": move.kind,
                "coalition": list(move.coalition),
                "from": move.source.serialize(),
                "to": move.target.serialize(),
                "share_before": move.share_before,
                "share_after": move.share_after,
            }
            for move in result.trajectory
        ],
        "utilities": {
            s.serialize(): {
                **{str(m): v for m, v in shares.items()},
                "total": sum(shares.values()),
            }
            for s, shares in matrix
        },
        "link_rounds": link_rounds,
        "final_network_edges": _serialize_edges(final_graph),
    }
    written.append(_write_json(out / "report.json", report))
    result.timer.write(out / "timings.json")
    return written


def load_simulation_report(report_dir: str | Path) -> dict:
    path = Path(report_dir)
    if path.is_dir():
        path = path / "report.json"
    with path.open() as handle:
        report = json.load(handle)
    if report.get("command") != "simulate":
        raise ValueError(f"{path}: not a simulation report")
    return report


# ---------------------------------------------------------------------------
# analyze-tables


@dataclass
class TableAnalysis:
    table: tables.TableUtilities
    graph: TransitionGraph
    labels: dict[CoalitionStructure, str]
    stable: tuple[CoalitionStructure, ...]
    policy_edges: dict[str, tuple[Move, ...]]
    reachability: dict[str, dict[CoalitionStructure, tuple[CoalitionStructure, ...]]]


def analyze_table(
    table: tables.TableUtilities, *, split_rule: str = "strict"
) -> TableAnalysis:
    """Stable set, admitted-move graph and per-policy reachability."""
    table.require_complete()
    graph = coalitions.transition_graph(table, split_rule=split_rule)
    stable = coalitions.stable_set(table, split_rule=split_rule)
    labels = table.labels()
    order = {s: i for i, s in enumerate(table.structures)}
    policy_edges: dict[str, tuple[Move, ...]] = {}
    reachability: dict[str, dict[CoalitionStructure, tuple[CoalitionStructure, ...]]] = {}
    for policy in coalitions.MOVE_POLICIES:
        edges = coalitions.policy_moves(graph, table, policy, split_rule=split_rule)
        policy_edges[policy] = edges
        reachability[policy] = {
            start: tuple(
                sorted(
                    coalitions.reachable_absorbing(graph, edges, start),
                    key=lambda s: order[s],
                )
            )
            for start in table.structures
        }
    return TableAnalysis(
        table=table,
        graph=graph,
        labels=labels,
        stable=tuple(sorted(stable, key=lambda s: order[s])),
        policy_edges=policy_edges,
        reachability=reachability,
    )


def write_analysis_artifacts(
    analyses: Sequence[TableAnalysis],
    out_dir: str | Path,
    *,
    prices: Mapping[str, float] | None = None,
    figures: bool = True,
    split_rule: str = "strict",
) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    timer = Timer()
    written: list[Path] = []
    report: dict = {"command": "analyze-tables", "split_rule": split_rule, "tables": {}}

    reach_rows: list[tuple[str, str, str, str]] = []
    for analysis in analyses:
        name = analysis.table.name
        labels = analysis.labels
        for policy, edges in analysis.policy_edges.items():
            dot_path = out / f"transitions_{name}_{policy}.dot"
            dot_path.write_text(
                coalitions.transition_to_dot(
                    analysis.graph,
                    labels,
                    moves=edges,
                    title=f"{name}: admitted moves under {policy} ordering",
                )
            )
            written.append(dot_path)
        if figures:
            from . import figures as figs

            with timer.time(f"figure_{name}"):
                written.append(
                    figs.plot_transition_graph(
                        analysis.graph,
                        out / f"transitions_{name}.png",
                        labels=labels,
                        title=f"{name}: structure transitions",
                    )
                )
        for policy in coalitions.MOVE_POLICIES:
            for start, finals in analysis.reachability[policy].items():
                reach_rows.append(
                    (
                        name,
                        policy,
                        labels[start],
                        "|".join(labels[f] for f in finals),
                    )
                )
        report["tables"][name] = {
            "stable_set": [
                {"label": labels[s], "structure": s.serialize()}
                for s in analysis.stable
            ],
            "structure_labels": {
                s.serialize(): labels[s] for s in analysis.table.structures
            },
            "row_sum_deviations": list(analysis.table.row_sum_deviations()),
            "admitted_moves": len(analysis.graph.moves),
        }

    reach_path = out / "reachability.csv"
    with reach_path.open("w", newline="") as handle:
        import csv as _csv

        writer = _csv.writer(handle)
        writer.writerow(["table", "policy", "start", "absorbing_reachable"])
        writer.writerows(reach_rows)
    written.append(reach_path)

    if prices and len(prices) >= 2:
        priced = {
            price: next(a.table for a in analyses if a.table.name == name)
            for name, price in prices.items()
        }
        linearity = tables.check_cost_linearity(priced)
        report["cost_linearity"] = {
            "ok": linearity.ok,
            "mismatches": list(linearity.mismatches),
            "slopes": {
                f"{serial}|sp{m}": slope
                for (serial, m), slope in sorted(linearity.slopes.items())
            },
        }

    written.append(_write_json(out / "report.json", report))
    timer.write(out / "timings.json")
    return written


# ---------------------------------------------------------------------------
# demand-change


@dataclass
class DemandChangeResult:
    scenario: Scenario
    structure: CoalitionStructure
    before: NetworkGraph
    after: NetworkGraph
    toggled: tuple[int, ...]
    rounds: int
    added: tuple[tuple[int, Node], ...]
    removed: tuple[tuple[int, Node], ...]
    timer: Timer


def run_demand_change(
    report: dict,
    toggles: Sequence[int],
    *,
    model: str | None = None,
) -> DemandChangeResult:
    """Flip device roles in a finished run and let the network re-converge.

    The prior converged network is the starting point; only the affected
    chains are reset before play resumes, so the move count measures how
    disruptive the demand change was.
    """
    from .config import parse_config

    timer = Timer()
    config = parse_config(report["config"])
    seed = int(report["seed"])
    scenario = config.scenario(seed)
    structure = CoalitionStructure.parse(report["final_structure"])
    before = _graph_from_edges(report["final_network_edges"])
    model = model or report.get("throughput_model")

    toggled_scenario = scenario
    working = before.copy()
    for td_id in sorted(set(int(t) for t in toggles)):
        toggled_scenario = toggle_source(toggled_scenario, td_id)
        _reset_device(toggled_scenario, working, td_id)

    with timer.time("relink"):
        after, rounds = linkgame.run_link_formation(
            toggled_scenario,
            structure,
            working,
            model=model,
            seed=int(report["seed"]) + 1,  # fresh play order for the follow-up rounds
        )
    before_edges = set(before.edges())
    after_edges = set(after.edges())
    return DemandChangeResult(
        scenario=toggled_scenario,
        structure=structure,
        before=before,
        after=after,
        toggled=tuple(sorted(set(int(t) for t in toggles))),
        rounds=rounds,
        added=tuple(sorted(after_edges - before_edges)),
        removed=tuple(sorted(before_edges - after_edges)),
        timer=timer,
    )


def _reset_device(scenario: Scenario, graph: NetworkGraph, td_id: int) -> None:
    """Give a toggled device (and anyone depending on it) a clean slate."""
    feeder = graph.feeder_of(td_id)
    if feeder is not None:
        # whoever relayed through this device falls back to direct attachment
        graph.drop_link(feeder)
        graph.set_link(feeder, linkgame._fallback_station(scenario, feeder))
    if graph.link_of(td_id) is not None:
        old = graph.link_of(td_id)
        graph.drop_link(td_id)
        if old is not None and old.kind == "td":
            linkgame._release_chain(scenario, graph, old.id)
    device = scenario.device(td_id)
    if device.is_source:
        graph.set_link(td_id, linkgame._fallback_station(scenario, td_id))


def write_demand_change_artifacts(
    result: DemandChangeResult, out_dir: str | Path, *, figures: bool = True
) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    import csv as _csv

    diff_path = out / "diff.csv"
    with diff_path.open("w", newline="") as handle:
        writer = _csv.writer(handle)
        writer.writerow(["change", "transmitter", "target_kind", "target_id"])
        for td_id, target in result.removed:
            writer.writerow(["removed", td_id, target.kind, target.id])
        for td_id, target in result.added:
            writer.writerow(["added", td_id, target.kind, target.id])
    written.append(diff_path)

    after_dot = out / "network_after.dot"
    after_dot.write_text(
        linkgame.graph_to_dot(
            result.scenario,
            result.after,
            title=f"re-converged network under {result.structure.serialize()}",
        )
    )
    written.append(after_dot)

    if figures:
        from . import figures as figs

        written.append(
            figs.plot_network(
                result.scenario,
                result.before,
                out / "network_before.png",
                title="network before demand change",
            )
        )
        written.append(
            figs.plot_network(
                result.scenario,
                result.after,
                out / "network_after.png",
                title=f"network after toggling {list(result.toggled)}",
            )
        )

    report = {
        "command": "demand-change",
        "toggled": list(result.toggled),
        "structure": result.structure.serialize(),
        "rounds": result.rounds,
        "links_added": [[t, n.kind, n.id] for t, n in result.added],
        "links_removed": [[t, n.kind, n.id] for t, n in result.removed],
        "network_edges": _serialize_edges(result.after),
    }
    written.append(_write_json(out / "report.json", report))
    result.timer.write(out / "timings.json")
    return written
