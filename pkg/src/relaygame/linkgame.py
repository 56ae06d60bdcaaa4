"""Myopic link-formation play on the relay network.

State is a :class:`NetworkGraph`: each transmitting device holds exactly one
outgoing link, either to a base station or to a vacant device acting as its
relay.  Vacant devices accept at most one flow, and a recruited relay becomes
a transmitting device itself, so chains of any depth can grow hop by hop.

Play is sequential best response.  A device moves only for a strict gain in
the end-to-end throughput of the flow it carries.  An occupied relay can be
taken over, but only by a challenger whose throughput increment from that
relay strictly exceeds the incumbent's; the displaced device immediately
falls back to its best direct station link and re-enters the round.  Because
the winner's gain exceeds the loser's loss, total served throughput rises
with every accepted move, which is what guarantees convergence.
"""

from __future__ import annotations

from dataclasses import dataclass

from .coalitions import CoalitionStructure
from .model import Node, Scenario, bs_node, substream, td_node
from .radio import RelayPath, ThroughputModel, is_admissible, link_snr, resolve_model

__all__ = [
    "NetworkGraph",
    "Strategy",
    "InvalidNetworkError",
    "ConvergenceError",
    "initial_star",
    "action_space",
    "best_response",
    "apply_strategy",
    "run_link_formation",
    "verify_nash",
    "flow_path",
    "flow_throughput",
    "validate_graph",
    "graph_to_dot",
]


class InvalidNetworkError(ValueError):
    pass


class ConvergenceError(RuntimeError):
    """Raised when play exceeds the round cap (10x the device count)."""


@dataclass(frozen=True)
class Strategy:
    """One proposed link replacement: ``actor`` redirects its link to ``target``."""

    actor: int
    target: Node


class NetworkGraph:
    """Mutable link map with the reverse (who-feeds-whom) index kept in sync."""

    def __init__(self, links: dict[int, Node] | None = None):
        self._links: dict[int, Node] = {}
        self._feeders: dict[int, int] = {}  # relay td -> transmitter it serves
        for td_id, target in (links or {}).items():
            self.set_link(td_id, target)

    # -- primitives ------------------------------------------------------

    def link_of(self, td_id: int) -> Node | None:
        return self._links.get(td_id)

    def feeder_of(self, td_id: int) -> int | None:
        return self._feeders.get(td_id)

    def set_link(self, td_id: int, target: Node) -> None:
        if target == td_node(td_id):
            raise InvalidNetworkError(f"TD{td_id} cannot link to itself")
        self.drop_link(td_id)
        if target.kind == "td":
            if target.id in self._feeders:
                raise InvalidNetworkError(
                    f"TD{target.id} already relays for TD{self._feeders[target.id]}"
                )
            self._feeders[target.id] = td_id
        self._links[td_id] = target

    def drop_link(self, td_id: int) -> None:
        old = self._links.pop(td_id, None)
        if old is not None and old.kind == "td":
            del self._feeders[old.id]

    def edges(self) -> list[tuple[int, Node]]:
        return sorted(self._links.items())

    def copy(self) -> "NetworkGraph":
        clone = NetworkGraph()
        clone._links = dict(self._links)
        clone._feeders = dict(self._feeders)
        return clone

    def __eq__(self, other: object) -> bool:
        return isinstance(other, NetworkGraph) and self._links == other._links

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        parts = ", ".join(f"{i}->{t.label()}" for i, t in self.edges())
        return f"NetworkGraph({parts})"


def is_transmitting(scenario: Scenario, graph: NetworkGraph, td_id: int) -> bool:
    """Sources always transmit; a vacant device transmits while it has a flow."""
    if graph.link_of(td_id) is None:
        return False
    return scenario.device(td_id).is_source or graph.feeder_of(td_id) is not None


def _downstream(graph: NetworkGraph, td_id: int) -> list[int]:
    """Devices on the chain from ``td_id`` to its station, inclusive."""
    chain = [td_id]
    seen = {td_id}
    node = graph.link_of(td_id)
    while node is not None and node.kind == "td":
        if node.id in seen:
            raise InvalidNetworkError("link chain contains a cycle")
        chain.append(node.id)
        seen.add(node.id)
        node = graph.link_of(node.id)
    return chain


def _flow_origin(graph: NetworkGraph, td_id: int) -> int:
    origin = td_id
    seen = set()
    while True:
        if origin in seen:
            raise InvalidNetworkError("feeder chain contains a cycle")
        seen.add(origin)
        feeder = graph.feeder_of(origin)
        if feeder is None:
            return origin
        origin = feeder


def flow_path(scenario: Scenario, graph: NetworkGraph, source_td: int) -> RelayPath:
    """The relay path of the flow originating at ``source_td``."""
    chain = _downstream(graph, source_td)
    terminal = graph.link_of(chain[-1])
    if terminal is None or terminal.kind != "bs":
        raise InvalidNetworkError(f"flow from TD{source_td} does not reach a station")
    return RelayPath(source=chain[0], hops=tuple(chain[1:]), station=terminal.id)


def flow_throughput(
    scenario: Scenario,
    graph: NetworkGraph,
    source_td: int,
    model: ThroughputModel | str | None = None,
) -> float:
    path = flow_path(scenario, graph, source_td)
    return resolve_model(model).path_rate(scenario, path)


def initial_star(scenario: Scenario) -> NetworkGraph:
    """Every source attached directly to its nearest station (lower id on ties)."""
    graph = NetworkGraph()
    for device in scenario.devices:
        if device.is_source:
            graph.set_link(device.id, _fallback_station(scenario, device.id))
    return graph


def _fallback_station(scenario: Scenario, td_id: int) -> Node:
    position = scenario.device(td_id).position
    best = min(
        scenario.stations, key=lambda b: (position.distance_to(b.position), b.id)
    )
    return bs_node(best.id)


def action_space(
    scenario: Scenario,
    graph: NetworkGraph,
    structure: CoalitionStructure,
    actor: int,
) -> list[Node]:
    """Feasible link targets for ``actor``: all stations plus shareable relays.

    Station links are always available as the fallback attachment.  A relay
    must be a vacant device owned by the actor's provider or a cooperation
    partner, its link must meet the admission SNR, and taking it must not
    close a loop (which covers the two-device back-and-forth).  Occupied
    relays stay listed; winning one is settled at proposal time.
    """
    owner = scenario.device(actor).owner
    allowed_owners = structure.partners_of(owner) | {owner}
    targets: list[Node] = sorted(
        (bs_node(b.id) for b in scenario.stations), key=lambda n: n.id
    )
    for device in scenario.devices:
        if device.id == actor or device.is_source:
            continue
        if device.owner not in allowed_owners:
            continue
        if not is_admissible(scenario, actor, td_node(device.id)):
            continue
        if actor in _downstream(graph, device.id):
            continue  # would loop the chain back onto itself
        targets.append(td_node(device.id))
    return targets


def apply_strategy(
    scenario: Scenario,
    graph: NetworkGraph,
    strategy: Strategy,
) -> tuple[int | None, int | None]:
    """Mutate ``graph`` with one accepted move; keeps every invariant intact.

    Returns ``(displaced, recruited)``: the device that lost its relay to the
    actor (reset to its fallback station) and the idle relay just recruited
    (given a fallback station link), either of which may be None.  Relays
    abandoned upstream of the move go idle again, cascading downstream.
    """
    actor, target = strategy.actor, strategy.target
    old = graph.link_of(actor)
    if old == target:
        return None, None
    graph.drop_link(actor)
    if old is not None and old.kind == "td":
        _release_chain(scenario, graph, old.id)
    displaced = recruited = None
    if target.kind == "td":
        incumbent = graph.feeder_of(target.id)
        if incumbent is not None:
            graph.drop_link(incumbent)
            graph.set_link(incumbent, _fallback_station(scenario, incumbent))
            displaced = incumbent
        if graph.link_of(target.id) is None:
            graph.set_link(target.id, _fallback_station(scenario, target.id))
            recruited = target.id
    graph.set_link(actor, target)
    return displaced, recruited


def _release_chain(scenario: Scenario, graph: NetworkGraph, td_id: int) -> None:
    """A relay whose flow went away drops its own link, and so on downstream."""
    while td_id is not None:
        device = scenario.device(td_id)
        if device.is_source or graph.feeder_of(td_id) is not None:
            return  # still carrying something
        nxt = graph.link_of(td_id)
        graph.drop_link(td_id)
        td_id = nxt.id if nxt is not None and nxt.kind == "td" else None


def _throughput_via(
    scenario: Scenario,
    graph: NetworkGraph,
    actor: int,
    target: Node,
    model: ThroughputModel,
) -> float:
    trial = graph.copy()
    apply_strategy(scenario, trial, Strategy(actor, target))
    return flow_throughput(scenario, trial, _flow_origin(trial, actor), model)


def _best_without(
    scenario: Scenario,
    graph: NetworkGraph,
    actor: int,
    excluded_td: int,
    model: ThroughputModel,
) -> float:
    """Best throughput of the actor's flow if relay ``excluded_td`` is off the table.

    Considers the current link (when it is not the excluded relay) and every
    direct station attachment; deeper alternatives are left for later rounds.
    """
    options = []
    current = graph.link_of(actor)
    if current is not None and current != td_node(excluded_td):
        options.append(flow_throughput(scenario, graph, _flow_origin(graph, actor), model))
    for station in scenario.stations:
        options.append(_throughput_via(scenario, graph, actor, bs_node(station.id), model))
    return max(options)


def _increment(
    scenario: Scenario,
    graph: NetworkGraph,
    actor: int,
    relay_td: int,
    model: ThroughputModel,
) -> float:
    """How much throughput the relay adds for this flow over doing without it."""
    with_relay = _throughput_via(scenario, graph, actor, td_node(relay_td), model)
    return with_relay - _best_without(scenario, graph, actor, relay_td, model)


def best_response(
    scenario: Scenario,
    graph: NetworkGraph,
    structure: CoalitionStructure,
    actor: int,
    model: ThroughputModel | str | None = None,
) -> Strategy | None:
    """The actor's best feasible strict improvement, or None to hold.

    Ties prefer station targets over relays, then the lowest node id.
    """
    model = resolve_model(model)
    current = flow_throughput(scenario, graph, _flow_origin(graph, actor), model)
    best: tuple[float, tuple[int, int], Node] | None = None
    for target in action_space(scenario, graph, structure, actor):
        if target == graph.link_of(actor):
            continue
        if target.kind == "td":
            incumbent = graph.feeder_of(target.id)
            if incumbent is not None:
                ours = _increment(scenario, graph, actor, target.id, model)
                theirs = _increment(scenario, graph, incumbent, target.id, model)
                if not ours > theirs:
                    continue  # the incumbent keeps its relay
        throughput = _throughput_via(scenario, graph, actor, target, model)
        rank = (0 if target.kind == "bs" else 1, target.id)
        if throughput > current and (
            best is None
            or throughput > best[0]
            or (throughput == best[0] and rank < best[1])
        ):
            best = (throughput, rank, target)
    return Strategy(actor, best[2]) if best else None


def run_link_formation(
    scenario: Scenario,
    structure: CoalitionStructure | None = None,
    start: NetworkGraph | None = None,
    *,
    model: ThroughputModel | str | None = None,
    seed: int | None = None,
    max_rounds: int | None = None,
    validate_each_move: bool = False,
) -> tuple[NetworkGraph, int]:
    """Sequential play from ``start`` (default: the star) until nobody moves.

    Each round shuffles the transmitting devices into a seeded order;
    displaced and freshly recruited relays rejoin at the end of the round.
    Returns the converged graph and the number of active rounds (min 1).
    Raises :class:`ConvergenceError` past ``max_rounds`` (default 10x the
    device count) — unreachable under the built-in models, whose accepted
    moves strictly raise total served throughput.
    """
    structure = structure if structure is not None else CoalitionStructure()
    model = resolve_model(model)
    seed = scenario.rng_seed if seed is None else seed
    graph = (start if start is not None else initial_star(scenario)).copy()
    cap = max_rounds if max_rounds is not None else 10 * max(len(scenario.devices), 1)
    seen_states: set[tuple] = {tuple(graph.edges())} if validate_each_move else set()
    active_rounds = 0
    for round_no in range(1, cap + 1):
        order = [
            d.id for d in scenario.devices if is_transmitting(scenario, graph, d.id)
        ]
        substream(seed, "link-order", structure.serialize(), round_no).shuffle(order)
        queue = list(order)
        changed = False
        while queue:
            actor = queue.pop(0)
            if not is_transmitting(scenario, graph, actor):
                continue  # lost its flow earlier in the round
            move = best_response(scenario, graph, structure, actor, model)
            if move is None:
                continue
            displaced, recruited = apply_strategy(scenario, graph, move)
            changed = True
            if validate_each_move:
                validate_graph(scenario, graph, structure)
                state = tuple(graph.edges())
                if state in seen_states:
                    raise ConvergenceError(
                        f"network state revisited after TD{actor} moved"
                    )
                seen_states.add(state)
            if displaced is not None:
                queue.append(displaced)
            if recruited is not None:
                queue.append(recruited)
        if changed:
            active_rounds += 1
        else:
            return graph, max(active_rounds, 1)
    raise ConvergenceError(f"no convergence within {cap} rounds")


def verify_nash(
    scenario: Scenario,
    graph: NetworkGraph,
    structure: CoalitionStructure | None = None,
    model: ThroughputModel | str | None = None,
) -> bool:
    """True when no transmitting device has a feasible strict improvement."""
    structure = structure if structure is not None else CoalitionStructure()
    for device in scenario.devices:
        if is_transmitting(scenario, graph, device.id):
            if best_response(scenario, graph, structure, device.id, model) is not None:
                return False
    return True


def validate_graph(
    scenario: Scenario,
    graph: NetworkGraph,
    structure: CoalitionStructure | None = None,
) -> None:
    """Assert every network invariant; raises :class:`InvalidNetworkError`.

    Checked: every source is linked and chains end at a station; only vacant
    devices relay, each for exactly one flow; relay hops are admissible and,
    when a structure is given, stay within the owner's cooperation range.
    """
    structure = structure if structure is not None else CoalitionStructure()
    for device in scenario.devices:
        if device.is_source:
            if graph.link_of(device.id) is None:
                raise InvalidNetworkError(f"source TD{device.id} has no link")
            flow_path(scenario, graph, device.id)  # raises on cycles / dead ends
            if graph.feeder_of(device.id) is not None:
                raise InvalidNetworkError(f"source TD{device.id} used as a relay")
        else:
            linked = graph.link_of(device.id) is not None
            serving = graph.feeder_of(device.id) is not None
            if linked != serving:
                raise InvalidNetworkError(
                    f"vacant TD{device.id} must transmit exactly while relaying"
                )
    for td_id, target in graph.edges():
        if target.kind == "td":
            if scenario.device(target.id).is_source:
                raise InvalidNetworkError("flows may not route through sources")
            if not is_admissible(scenario, td_id, target):
                raise InvalidNetworkError(
                    f"inadmissible relay link TD{td_id}->TD{target.id}"
                )
            owner = scenario.device(td_id).owner
            relay_owner = scenario.device(target.id).owner
            if relay_owner != owner and relay_owner not in structure.partners_of(owner):
                raise InvalidNetworkError(
                    f"TD{td_id} relays through non-cooperating provider {relay_owner}"
                )


def graph_to_dot(
    scenario: Scenario,
    graph: NetworkGraph,
    model: ThroughputModel | str | None = None,
    *,
    title: str = "relay network",
) -> str:
    """Graphviz rendering with owner/role on nodes and SNR/throughput on edges."""
    model = resolve_model(model)
    lines = [
        "digraph network {",
        f'    label="{title}";',
        "    rankdir=LR;",
    ]
    for station in sorted(scenario.stations, key=lambda b: b.id):
        lines.append(f'    "BS{station.id}" [shape=box, style=filled, fillcolor=lightgray];')
    for device in sorted(scenario.devices, key=lambda d: d.id):
        role = "source" if device.is_source else "vacant"
        lines.append(
            f'    "TD{device.id}" [shape=ellipse, label="TD{device.id}\\nSP{device.owner} {role}"];'
        )
    rates = {}
    for device in scenario.devices:
        if device.is_source and graph.link_of(device.id) is not None:
            path = flow_path(scenario, graph, device.id)
            rate = model.path_rate(scenario, path)
            for hop in (path.source, *path.hops):
                rates[hop] = rate
    for td_id, target in graph.edges():
        snr = link_snr(scenario, td_id, target)
        note = f"snr={snr:.3g}"
        if td_id in rates:
            note += f", rate={rates[td_id]:.4g}"
        lines.append(f'    "TD{td_id}" -> "{target.label()}" [label="{note}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
