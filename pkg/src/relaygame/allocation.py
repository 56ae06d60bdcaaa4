"""Coalition worth, Shapley shares and per-provider utility.

The worth of a provider coalition is what its members would earn running the
relay network with vacant-device sharing restricted to the coalition: revenue
on the served throughput of the members' sources minus the energy bill of the
members' transmitting devices.  Worth is evaluated standalone per member set,
so the characteristic cache is keyed by the set alone.

Within every coalition of a structure the coalition's worth is divided by the
Shapley value; a provider in several coalitions adds up its shares and then
pays the cooperation overhead: ``cost_per_slot * (|T| - 1)`` for each of its
coalitions ``T``.  Utilities read from the bundled tables follow exactly this
shape, which is why a table at one overhead price determines the tables at
every other price.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from itertools import combinations, permutations
from typing import Callable, Iterable, Mapping

from .coalitions import CoalitionStructure
from .linkgame import NetworkGraph, flow_throughput, run_link_formation
from .model import Scenario, substream
from .radio import ThroughputModel, resolve_model, td_energy_cost

__all__ = [
    "Allocation",
    "StabilityReport",
    "CharacteristicCache",
    "SimulatedUtilities",
    "shapley",
    "shapley_from_table",
    "marginal_contribution",
    "characteristic_value",
    "coalition_cost",
    "allocate",
    "check_allocation_stability",
]

SHAPLEY_PLAYER_CAP = 10

ValueFunction = Callable[[frozenset[int]], float]


def marginal_contribution(value: ValueFunction, member: int, base: Iterable[int]) -> float:
    """Worth added by ``member`` on top of the coalition ``base``."""
    base = frozenset(base)
    if member in base:
        raise ValueError(f"member {member} already belongs to the base coalition")
    return value(base | {member}) - value(base)


def shapley(value: ValueFunction, members: Iterable[int]) -> dict[int, float]:
    """Shapley shares of the game ``value`` restricted to ``members``.

    Closed form: each subset not containing the member weighs
    ``|U|! (|T|-|U|-1)! / |T|!`` on the member's marginal contribution.
    Equivalent to averaging marginals over all join orders.
    """
    team = tuple(sorted(set(members)))
    if not team:
        raise ValueError("cannot allocate within an empty coalition")
    if len(team) > SHAPLEY_PLAYER_CAP:
        raise ValueError(
            f"coalition of {len(team)} exceeds the Shapley cap ({SHAPLEY_PLAYER_CAP})"
        )
    size = len(team)
    total = math.factorial(size)
    shares: dict[int, float] = {}
    for member in team:
        others = [m for m in team if m != member]
        acc = 0.0
        for r in range(len(others) + 1):
            weight = math.factorial(r) * math.factorial(size - r - 1) / total
            for subset in combinations(others, r):
                acc += weight * marginal_contribution(value, member, subset)
        shares[member] = acc
    return shares


def shapley_from_table(
    values: Mapping[frozenset[int], float], members: Iterable[int]
) -> dict[int, float]:
    """Shapley shares for a game given as a subset-to-worth table (empty set 0)."""

    def value(group: frozenset[int]) -> float:
        return 0.0 if not group else values[frozenset(group)]

    return shapley(value, members)


def shapley_by_permutation(value: ValueFunction, members: Iterable[int]) -> dict[int, float]:
    """Average marginal contribution over every join order (reference form)."""
    team = tuple(sorted(set(members)))
    shares = {m: 0.0 for m in team}
    count = 0
    for order in permutations(team):
        seen: set[int] = set()
        for member in order:
            shares[member] += marginal_contribution(value, member, seen)
            seen.add(member)
        count += 1
    return {m: s / count for m, s in shares.items()}


def coalition_cost(structure: CoalitionStructure, sp_id: int, cost_per_slot: float) -> float:
    """Cooperation overhead of one provider: slots held times the slot price."""
    return cost_per_slot * structure.cooperation_degree(sp_id)


class CharacteristicCache:
    """Memoized coalition worth; concurrent reads, one writer per key."""

    def __init__(self, compute: ValueFunction):
        self._compute = compute
        self._values: dict[frozenset[int], float] = {}
        self._lock = threading.Lock()

    def value(self, members: Iterable[int]) -> float:
        key = frozenset(members)
        try:
            return self._values[key]
        except KeyError:
            pass
        worth = 0.0 if not key else self._compute(key)
        with self._lock:
            return self._values.setdefault(key, worth)

    def snapshot(self) -> dict[frozenset[int], float]:
        return dict(self._values)


def characteristic_value(
    scenario: Scenario,
    members: Iterable[int],
    *,
    model: ThroughputModel | str | None = None,
    seed: int | None = None,
) -> float:
    """Worth of one provider coalition, evaluated standalone.

    Runs link formation with sharing restricted to the member set (every
    other provider plays alone, which cannot touch the members' flows in a
    noise-limited channel), then prices the members' served throughput and
    subtracts their energy bill.  The empty set is worth zero.
    """
    members = frozenset(members)
    if not members:
        return 0.0
    unknown = members - set(scenario.provider_ids)
    if unknown:
        raise ValueError(f"unknown provider ids: {sorted(unknown)}")
    structure = (
        CoalitionStructure.of([members]) if len(members) >= 2 else CoalitionStructure()
    )
    seed = scenario.rng_seed if seed is None else seed
    eval_seed = substream_seed(seed, "worth", ",".join(map(str, sorted(members))))
    graph, _rounds = run_link_formation(
        scenario, structure, model=model, seed=eval_seed
    )
    model = resolve_model(model)
    revenue = 0.0
    for sp_id in members:
        for source in scenario.sources(sp_id):
            revenue += scenario.econ.revenue_per_unit_throughput * flow_throughput(
                scenario, graph, source.id, model
            )
    energy = sum(td_energy_cost(scenario, graph, sp_id) for sp_id in members)
    return revenue - energy


def substream_seed(seed: int, *labels: object) -> int:
    """Stable derived integer seed for nested deterministic phases."""
    return substream(seed, *labels).getrandbits(63)


@dataclass(frozen=True)
class Allocation:
    """Utility division for one structure: per-coalition shares and totals."""

    structure: CoalitionStructure
    per_coalition: dict[tuple[frozenset[int], int], float]
    per_sp_total: dict[int, float]
    cost_per_slot: float

    @property
    def aggregated(self) -> float:
        return sum(self.per_sp_total.values())

    def coalition_shares(self, members: frozenset[int]) -> dict[int, float]:
        return {
            m: share
            for (group, m), share in self.per_coalition.items()
            if group == members
        }


class SimulatedUtilities:
    """Structure pricing backed by the live network simulation.

    Exposes the evaluator interface the coalition engine expects
    (``players`` / ``shares``) plus the full :class:`Allocation` and the
    per-structure converged network for reporting.
    """

    def __init__(
        self,
        scenario: Scenario,
        *,
        cost_per_slot: float | None = None,
        model: ThroughputModel | str | None = None,
        seed: int | None = None,
    ):
        self.scenario = scenario
        self.cost_per_slot = (
            scenario.econ.coalition_cost if cost_per_slot is None else cost_per_slot
        )
        self.model = resolve_model(model)
        self.seed = scenario.rng_seed if seed is None else seed
        self.cache = CharacteristicCache(
            lambda members: characteristic_value(
                scenario, members, model=self.model, seed=self.seed
            )
        )
        self._shares: dict[CoalitionStructure, dict[int, float]] = {}
        self._networks: dict[CoalitionStructure, tuple[NetworkGraph, int]] = {}

    @property
    def players(self) -> tuple[int, ...]:
        return self.scenario.provider_ids

    def value(self, members: Iterable[int]) -> float:
        return self.cache.value(members)

    def allocation(self, structure: CoalitionStructure) -> Allocation:
        per_coalition: dict[tuple[frozenset[int], int], float] = {}
        totals = {m: 0.0 for m in self.players}
        for coalition in structure.coalitions:
            shares = shapley(self.cache.value, coalition)
            for member, share in shares.items():
                per_coalition[(coalition, member)] = share
                totals[member] += share
        for member in structure.singletons(self.players):
            worth = self.cache.value({member})
            per_coalition[(frozenset({member}), member)] = worth
            totals[member] += worth
        for member in self.players:
            totals[member] -= coalition_cost(structure, member, self.cost_per_slot)
        return Allocation(
            structure=structure,
            per_coalition=per_coalition,
            per_sp_total=totals,
            cost_per_slot=self.cost_per_slot,
        )

    def shares(self, structure: CoalitionStructure) -> dict[int, float]:
        cached = self._shares.get(structure)
        if cached is None:
            cached = self.allocation(structure).per_sp_total
            self._shares[structure] = cached
        return dict(cached)

    def network_for(self, structure: CoalitionStructure) -> tuple[NetworkGraph, int]:
        """Converged network when the whole structure is in force."""
        cached = self._networks.get(structure)
        if cached is None:
            eval_seed = substream_seed(self.seed, "network", structure.serialize())
            cached = run_link_formation(
                self.scenario, structure, model=self.model, seed=eval_seed
            )
            self._networks[structure] = cached
        return cached


def allocate(
    scenario: Scenario,
    structure: CoalitionStructure,
    *,
    cost_per_slot: float | None = None,
    model: ThroughputModel | str | None = None,
    seed: int | None = None,
) -> Allocation:
    """One-shot utility division under ``structure`` (see module docstring)."""
    return SimulatedUtilities(
        scenario, cost_per_slot=cost_per_slot, model=model, seed=seed
    ).allocation(structure)


@dataclass(frozen=True)
class StabilityReport:
    ok: bool
    violations: tuple[str, ...]
    notes: tuple[str, ...] = ()


def check_allocation_stability(
    allocation: Allocation,
    value: ValueFunction,
    *,
    rel_tol: float = 1e-9,
    abs_tol: float = 1e-9,
) -> StabilityReport:
    """Efficiency per coalition and individual rationality per provider.

    Per-coalition rationality of multi-provider groups (net of overhead) is
    reported as a note, not a violation: overhead can make a coalition's net
    fall below its worth split while members still individually gain.
    """
    violations: list[str] = []
    notes: list[str] = []
    groups = set(allocation.structure.coalitions) | {
        frozenset({m}) for m in allocation.structure.singletons(allocation.per_sp_total)
    }
    for members in sorted(groups, key=lambda g: tuple(sorted(g))):
        shares = allocation.coalition_shares(members)
        total, worth = sum(shares.values()), value(members)
        if not math.isclose(total, worth, rel_tol=rel_tol, abs_tol=abs_tol):
            violations.append(
                f"shares of {tuple(sorted(members))} sum to {total!r}, worth is {worth!r}"
            )
    for member, total in sorted(allocation.per_sp_total.items()):
        standalone = value(frozenset({member}))
        if total < standalone and not math.isclose(
            total, standalone, rel_tol=rel_tol, abs_tol=abs_tol
        ):
            violations.append(
                f"SP{member} nets {total!r}, below standalone worth {standalone!r}"
            )
    for members in sorted(allocation.structure.coalitions, key=lambda g: tuple(sorted(g))):
        net = sum(
            allocation.per_sp_total[m] for m in members
        )
        standalone = sum(value(frozenset({m})) for m in members)
        if net < standalone:
            notes.append(
                f"coalition {tuple(sorted(members))} nets {net!r} vs standalone sum {standalone!r}"
            )
    return StabilityReport(
        ok=not violations, violations=tuple(violations), notes=tuple(notes)
    )
