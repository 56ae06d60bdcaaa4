"""Best-response link formation: moves, contests, convergence, validity."""

from __future__ import annotations

import itertools

import pytest

from relaygame.coalitions import CoalitionStructure
from relaygame.linkgame import (
    ConvergenceError,
    InvalidNetworkError,
    NetworkGraph,
    Strategy,
    action_space,
    apply_strategy,
    best_response,
    flow_path,
    flow_throughput,
    graph_to_dot,
    initial_star,
    run_link_formation,
    validate_graph,
    verify_nash,
)
from relaygame.model import ROLE_SOURCE, ROLE_VACANT, bs_node, td_node
from relaygame.radio import is_admissible, link_snr, resolve_model

from conftest import line_world, make_scenario

NO_COOP = CoalitionStructure()
RATE_DIRECT_800M = 1.336785476203755
RATE_VIA_MIDWAY = 2.333777553520566


class ScriptedRates:
    """Deterministic stand-in model keyed on (origin, first relay)."""

    name = "scripted"

    def __init__(self, rates: dict[tuple[int, int | None], float]):
        self.rates = rates

    def path_rate(self, scenario, path):
        hop = path.hops[0] if path.hops else None
        return self.rates[(path.source, hop)]


def contested_relay_world():
    """Two sources of one provider and a single relay both can reach."""
    scenario = make_scenario(
        stations=[(100.0, 1000.0)],
        devices=[
            (1, 1, 900.0, 800.0, ROLE_SOURCE),
            (2, 1, 900.0, 1200.0, ROLE_SOURCE),
            (3, 1, 500.0, 1000.0, ROLE_VACANT),
        ],
    )
    # increments: TD1 gains 0.175 through the relay, TD2 only 0.116
    rates = {
        (1, None): 1.0,
        (2, None): 1.0,
        (1, 3): 1.175,
        (2, 3): 1.116,
    }
    return scenario, ScriptedRates(rates)


# ---------------------------------------------------------------------------
# initial topology and action spaces


def test_initial_star_links_every_source_to_nearest_station():
    s = make_scenario(
        stations=[(100.0, 1000.0), (1900.0, 1000.0)],
        devices=[
            (1, 1, 200.0, 1000.0, ROLE_SOURCE),
            (2, 1, 1800.0, 1000.0, ROLE_SOURCE),
            (3, 1, 600.0, 1000.0, ROLE_VACANT),
        ],
    )
    graph = initial_star(s)
    assert graph.link_of(1) == bs_node(1)
    assert graph.link_of(2) == bs_node(2)
    assert graph.link_of(3) is None


def test_initial_star_breaks_station_ties_by_lower_id():
    s = make_scenario(
        stations=[(500.0, 1000.0), (1500.0, 1000.0)],
        devices=[(1, 1, 1000.0, 1000.0, ROLE_SOURCE)],
    )
    assert initial_star(s).link_of(1) == bs_node(1)


def test_zero_sources_make_an_empty_star():
    s = make_scenario(
        stations=[(100.0, 1000.0)],
        devices=[(1, 1, 300.0, 1000.0, ROLE_VACANT)],
    )
    graph, rounds = run_link_formation(s)
    assert graph.edges() == []
    assert rounds == 1


def test_action_space_respects_cooperation():
    s = make_scenario(
        stations=[(100.0, 1000.0)],
        devices=[
            (1, 1, 900.0, 1000.0, ROLE_SOURCE),
            (2, 2, 700.0, 1000.0, ROLE_VACANT),  # other provider
            (3, 1, 500.0, 1000.0, ROLE_VACANT),  # own provider
            (4, 1, 880.0, 1000.0, ROLE_SOURCE),  # sources never relay
        ],
    )
    graph = initial_star(s)
    solo = action_space(s, graph, NO_COOP, 1)
    assert td_node(3) in solo
    assert td_node(2) not in solo
    assert td_node(4) not in solo
    assert bs_node(1) in solo
    shared = action_space(s, graph, CoalitionStructure.of([(1, 2)]), 1)
    assert td_node(2) in shared


def test_action_space_drops_inadmissible_relays():
    s = make_scenario(
        stations=[(100.0, 1000.0)],
        devices=[
            (1, 1, 1500.0, 1000.0, ROLE_SOURCE),
            (2, 1, 900.0, 1000.0, ROLE_VACANT),  # 600 m away: too weak
            (3, 1, 1100.0, 1000.0, ROLE_VACANT),  # 400 m away: fine
        ],
    )
    graph = initial_star(s)
    space = action_space(s, graph, NO_COOP, 1)
    assert td_node(3) in space
    assert td_node(2) not in space


def test_action_space_excludes_own_chain():
    s = line_world()
    graph = initial_star(s)
    graph.drop_link(1)
    graph.set_link(2, bs_node(1))
    graph.set_link(1, td_node(2))
    # the serving relay must not offer to link back into its own flow
    space = action_space(s, graph, NO_COOP, 2)
    assert td_node(1) not in space
    assert bs_node(1) in space


# ---------------------------------------------------------------------------
# single moves


def test_best_response_picks_profitable_relay():
    s = line_world()
    graph = initial_star(s)
    assert flow_throughput(s, graph, 1) == pytest.approx(RATE_DIRECT_800M)
    move = best_response(s, graph, NO_COOP, 1)
    assert move == Strategy(1, td_node(2))
    apply_strategy(s, graph, move)
    assert flow_throughput(s, graph, 1) == pytest.approx(RATE_VIA_MIDWAY)
    assert graph.link_of(2) == bs_node(1)  # recruited relay got its uplink


def test_best_response_noop_when_nothing_improves():
    s = make_scenario(
        stations=[(100.0, 1000.0)],
        devices=[(1, 1, 400.0, 1000.0, ROLE_SOURCE)],
    )
    graph = initial_star(s)
    assert best_response(s, graph, NO_COOP, 1) is None


def test_relay_contest_resolved_by_strict_increment():
    s, model = contested_relay_world()
    graph = initial_star(s)
    # the weaker contender grabs the relay first
    move = best_response(s, graph, NO_COOP, 2, model)
    assert move == Strategy(2, td_node(3))
    apply_strategy(s, graph, move)
    assert flow_path(s, graph, 2).hops == (3,)
    # the stronger contender displaces it (0.175 > 0.116)
    move = best_response(s, graph, NO_COOP, 1, model)
    assert move == Strategy(1, td_node(3))
    displaced, recruited = apply_strategy(s, graph, move)
    assert displaced == 2
    assert recruited is None
    assert flow_path(s, graph, 1).hops == (3,)
    assert graph.link_of(2) == bs_node(1)  # loser fell back to its station
    # and the loser cannot win the relay back
    assert best_response(s, graph, NO_COOP, 2, model) is None


def test_contest_outcome_is_order_independent():
    for seed in range(6):
        s, model = contested_relay_world()
        graph, _ = run_link_formation(s, model=model, seed=seed)
        assert flow_path(s, graph, 1).hops == (3,)
        assert graph.link_of(2) == bs_node(1)
        assert verify_nash(s, graph, model=model)


def test_displacement_releases_downstream_chain():
    s = make_scenario(
        stations=[(100.0, 1000.0)],
        devices=[
            (1, 1, 1200.0, 1000.0, ROLE_SOURCE),
            (2, 1, 800.0, 1000.0, ROLE_VACANT),
            (3, 1, 400.0, 1000.0, ROLE_VACANT),
        ],
    )
    graph = NetworkGraph()
    graph.set_link(3, bs_node(1))
    graph.set_link(2, td_node(3))
    graph.set_link(1, td_node(2))
    validate_graph(s, graph, NO_COOP)
    # tearing the source off its relay idles the whole chain
    apply_strategy(s, graph, Strategy(1, bs_node(1)))
    assert graph.link_of(2) is None
    assert graph.link_of(3) is None
    validate_graph(s, graph, NO_COOP)


# ---------------------------------------------------------------------------
# full runs


def test_run_converges_to_relay_and_counts_rounds(relay_pays_off):
    graph, rounds = run_link_formation(relay_pays_off, validate_each_move=True)
    assert flow_path(relay_pays_off, graph, 1).hops == (2,)
    assert rounds == 1
    assert verify_nash(relay_pays_off, graph)


def test_run_is_deterministic_per_seed(relay_pays_off):
    a = run_link_formation(relay_pays_off, seed=5)
    b = run_link_formation(relay_pays_off, seed=5)
    assert a[0].edges() == b[0].edges() and a[1] == b[1]


def test_initial_star_with_profitable_relay_is_not_nash(relay_pays_off):
    graph = initial_star(relay_pays_off)
    assert not verify_nash(relay_pays_off, graph)


def test_round_cap_raises(relay_pays_off):
    with pytest.raises(ConvergenceError):
        run_link_formation(relay_pays_off, max_rounds=0)


def test_cross_provider_relay_needs_cooperation():
    s = make_scenario(
        stations=[(100.0, 1000.0)],
        devices=[
            (1, 1, 900.0, 1000.0, ROLE_SOURCE),
            (2, 2, 500.0, 1000.0, ROLE_VACANT),
        ],
    )
    alone, _ = run_link_formation(s, NO_COOP)
    assert alone.edges() == [(1, bs_node(1))]
    together, _ = run_link_formation(s, CoalitionStructure.of([(1, 2)]))
    assert flow_path(s, together, 1).hops == (2,)


# ---------------------------------------------------------------------------
# graph validity


def test_validate_rejects_unlinked_source(relay_pays_off):
    graph = NetworkGraph()
    with pytest.raises(InvalidNetworkError):
        validate_graph(relay_pays_off, graph)


def test_validate_rejects_idle_relay_with_link(relay_pays_off):
    graph = initial_star(relay_pays_off)
    graph.set_link(2, bs_node(1))  # vacant TD transmitting with nobody to serve
    with pytest.raises(InvalidNetworkError):
        validate_graph(relay_pays_off, graph)


def test_validate_rejects_cross_provider_link_without_cooperation():
    s = make_scenario(
        stations=[(100.0, 1000.0)],
        devices=[
            (1, 1, 900.0, 1000.0, ROLE_SOURCE),
            (2, 2, 500.0, 1000.0, ROLE_VACANT),
        ],
    )
    graph = NetworkGraph()
    graph.set_link(2, bs_node(1))
    graph.set_link(1, td_node(2))
    validate_graph(s, graph, CoalitionStructure.of([(1, 2)]))
    with pytest.raises(InvalidNetworkError):
        validate_graph(s, graph, NO_COOP)


def test_validate_rejects_source_as_relay_target():
    s = make_scenario(
        stations=[(100.0, 1000.0)],
        devices=[
            (1, 1, 600.0, 1000.0, ROLE_SOURCE),
            (2, 1, 700.0, 1000.0, ROLE_SOURCE),
        ],
    )
    graph = NetworkGraph()
    graph.set_link(1, bs_node(1))
    graph.set_link(2, td_node(1))
    with pytest.raises(InvalidNetworkError):
        validate_graph(s, graph, NO_COOP)


def test_validate_rejects_dangling_chain(relay_pays_off):
    graph = NetworkGraph()
    graph.set_link(1, td_node(2))  # relay never linked onward
    with pytest.raises(InvalidNetworkError):
        validate_graph(relay_pays_off, graph)


def test_network_graph_refuses_double_feeding():
    graph = NetworkGraph()
    graph.set_link(1, td_node(3))
    with pytest.raises(ValueError):
        graph.set_link(2, td_node(3))
    with pytest.raises(ValueError):
        graph.set_link(4, td_node(4))


def test_graph_to_dot_mentions_nodes_and_rates(relay_pays_off):
    graph, _ = run_link_formation(relay_pays_off)
    dot = graph_to_dot(relay_pays_off, graph)
    assert dot.startswith("digraph")
    assert "TD1" in dot and "TD2" in dot and "BS1" in dot


# ---------------------------------------------------------------------------
# brute-force cross-checks on exhaustively small instances


def available_targets(scenario, graph, structure, actor, model):
    """Re-derive the rulebook: all links actor may switch to right now."""
    owner = scenario.device(actor).owner
    allowed_sps = {owner} | set(structure.partners_of(owner))
    targets = [bs_node(b.id) for b in scenario.stations]
    for device in scenario.devices:
        if device.id == actor or device.is_source:
            continue
        if device.owner not in allowed_sps:
            continue
        if not is_admissible(scenario, actor, td_node(device.id)):
            continue
        # no feeding a device that already carries the actor's own flow
        chain, walk = [], graph.link_of(device.id)
        node = device.id
        seen = set()
        while node is not None and node not in seen:
            seen.add(node)
            chain.append(node)
            nxt = graph.link_of(node)
            node = nxt.id if nxt is not None and nxt.kind == "td" else None
        if actor in chain:
            continue
        incumbent = graph.feeder_of(device.id)
        if incumbent is not None and incumbent != actor:
            mine = increment(scenario, graph, actor, device.id, model)
            theirs = increment(scenario, graph, incumbent, device.id, model)
            if not mine > theirs:
                continue
        targets.append(td_node(device.id))
    return targets


def origin_of(graph, td):
    node = td
    while graph.feeder_of(node) is not None:
        node = graph.feeder_of(node)
    return node


def throughput_after(scenario, graph, actor, target, model):
    trial = graph.copy()
    apply_strategy(scenario, trial, Strategy(actor, target))
    return flow_throughput(scenario, trial, origin_of(trial, actor), model)


def increment(scenario, graph, td, relay, model):
    best_without = max(
        throughput_after(scenario, graph, td, bs_node(b.id), model)
        for b in scenario.stations
    )
    current = graph.link_of(td)
    if current is not None and not (current.kind == "td" and current.id == relay):
        best_without = max(
            best_without,
            flow_throughput(scenario, graph, origin_of(graph, td), model),
        )
    with_relay = throughput_after(scenario, graph, td, td_node(relay), model)
    return with_relay - best_without


def assert_fixed_point_by_brute_force(scenario, graph, structure, model):
    model = resolve_model(model)
    for device in scenario.devices:
        linked = graph.link_of(device.id) is not None
        serving = graph.feeder_of(device.id) is not None
        if not (device.is_source and linked or serving and linked):
            continue
        now = flow_throughput(scenario, graph, origin_of(graph, device.id), model)
        for target in available_targets(scenario, graph, structure, device.id, model):
            after = throughput_after(scenario, graph, device.id, target, model)
            assert after <= now + 1e-12, (
                f"TD{device.id} could deviate to {target} for {after} > {now}"
            )


def test_converged_graphs_survive_brute_force_deviation_scan():
    worlds = [
        (line_world(), NO_COOP, None),
        (contested_relay_world()[0], NO_COOP, contested_relay_world()[1]),
        (
            make_scenario(
                stations=[(100.0, 1000.0), (1900.0, 1000.0)],
                devices=[
                    (1, 1, 900.0, 800.0, ROLE_SOURCE),
                    (2, 1, 850.0, 1250.0, ROLE_SOURCE),
                    (3, 2, 1300.0, 1000.0, ROLE_SOURCE),
                    (4, 1, 500.0, 900.0, ROLE_VACANT),
                    (5, 2, 1500.0, 1100.0, ROLE_VACANT),
                ],
            ),
            CoalitionStructure.of([(1, 2)]),
            None,
        ),
    ]
    for scenario, structure, model in worlds:
        graph, _ = run_link_formation(
            scenario, structure, model=model, validate_each_move=True
        )
        assert verify_nash(scenario, graph, structure, model)
        assert_fixed_point_by_brute_force(scenario, graph, structure, model)


def all_valid_graphs(scenario, structure):
    """Enumerate every complete assignment for the two-source/one-relay world."""
    sources = [d.id for d in scenario.devices if d.is_source]
    relays = [d.id for d in scenario.devices if not d.is_source]
    stations = [bs_node(b.id) for b in scenario.stations]
    per_source = []
    for src in sources:
        options = list(stations)
        for r in relays:
            if is_admissible(scenario, src, td_node(r)):
                options.append(td_node(r))
        per_source.append(options)
    for combo in itertools.product(*per_source):
        used = [t.id for t in combo if t.kind == "td"]
        if len(used) != len(set(used)):
            continue  # a relay may carry a single flow
        graph = NetworkGraph()
        for src, target in zip(sources, combo):
            graph.set_link(src, target)
        for r in set(used):
            graph.set_link(r, stations[0])
        yield graph


def test_formation_result_is_in_the_brute_force_nash_set():
    scenario, model = contested_relay_world()
    nash_set = []
    for graph in all_valid_graphs(scenario, NO_COOP):
        try:
            assert_fixed_point_by_brute_force(scenario, graph, NO_COOP, model)
        except AssertionError:
            continue
        nash_set.append(sorted(graph.edges()))
    assert nash_set  # the game always has at least one fixed point here
    converged, _ = run_link_formation(scenario, model=model)
    assert sorted(converged.edges()) in nash_set
