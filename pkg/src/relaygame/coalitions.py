"""Coalition structures over service providers and the merge-and-split engine.

A structure is a set of coalitions (size >= 2); providers covered by no
coalition are implicit singletons.  Cooperation is pairwise at heart: a
coalition is exactly a maximal clique of the "who shares with whom" graph, so
a triple coalition and its three pairwise coalitions describe the same
sharing arrangement and are stored in the same canonical form (the clique
cover).  That identification is what lets two-pair structures grow into the
full triple through a single pairwise proposal.

Moves:

* merge — provider ``m`` proposes a partnership with one provider it is not
  yet cooperating with.  Admitted when ``m`` strictly gains and every other
  provider whose coalition set changes at least holds its utility.
* split — provider ``m`` unilaterally (a) leaves one of its coalitions, or
  (b) inside a coalition of three or more, breaks the partnership with one
  member (the rest of the clique survives as two overlapping coalitions).
  Admitted when ``m`` strictly gains (a weak variant is selectable).

A structure with no admitted move for any provider is absorbing; the set of
absorbing structures is the stable set reported by the analyzer.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from itertools import combinations
from typing import Iterable, Mapping, Protocol, Sequence

from .model import substream

__all__ = [
    "CoalitionStructure",
    "Move",
    "TransitionGraph",
    "CycleError",
    "enumerate_structures",
    "structure_count_formula",
    "merge_candidates",
    "split_candidates",
    "update_step",
    "run_coalition_formation",
    "stable_set",
    "transition_graph",
    "policy_moves",
    "reachable_absorbing",
    "omega_labels",
    "transition_to_dot",
]

#: largest provider count the exhaustive enumeration will accept
ENUMERATION_LIMIT = 6

MOVE_POLICIES = ("best", "first", "random")
SPLIT_RULES = ("strict", "weak")


class CycleError(RuntimeError):
    """A merge-and-split trajectory revisited a structure.

    Cannot happen when every accepted move strictly improves its mover under
    one consistent utility table; tripping this signals an inconsistent or
    non-deterministic evaluator.
    """


def _maximal_cliques(edges: frozenset[frozenset[int]]) -> frozenset[frozenset[int]]:
    """Maximal cliques (size >= 2) of the graph given by its edge set."""
    vertices = sorted({v for e in edges for v in e})
    cliques: list[frozenset[int]] = []
    for size in range(2, len(vertices) + 1):
        for combo in combinations(vertices, size):
            if all(frozenset(pair) in edges for pair in combinations(combo, 2)):
                cliques.append(frozenset(combo))
    return frozenset(c for c in cliques if not any(c < d for d in cliques))


def _pair_edges(groups: Iterable[frozenset[int]]) -> frozenset[frozenset[int]]:
    return frozenset(
        frozenset(pair) for group in groups for pair in combinations(sorted(group), 2)
    )


@dataclass(frozen=True)
class CoalitionStructure:
    """Canonical cover of the provider set by cooperating groups.

    The constructor canonicalizes whatever it is given: groups of size one
    are dropped (singletons stay implicit), nested groups are absorbed, and
    any family of groups whose pairwise-cooperation graph contains a larger
    clique is re-covered by its maximal cliques.
    """

    coalitions: frozenset[frozenset[int]] = frozenset()

    def __post_init__(self) -> None:
        groups = []
        for group in self.coalitions:
            members = frozenset(group)
            if any(not isinstance(m, int) or m < 1 for m in members):
                raise ValueError("provider ids must be positive integers")
            if len(members) >= 2:
                groups.append(members)
        object.__setattr__(self, "coalitions", _maximal_cliques(_pair_edges(groups)))

    @classmethod
    def of(cls, groups: Iterable[Iterable[int]] = ()) -> "CoalitionStructure":
        return cls(frozenset(frozenset(g) for g in groups))

    # -- queries ---------------------------------------------------------

    def memberships(self, sp_id: int) -> frozenset[frozenset[int]]:
        """All coalitions provider ``sp_id`` belongs to."""
        return frozenset(c for c in self.coalitions if sp_id in c)

    def partners_of(self, sp_id: int) -> frozenset[int]:
        return frozenset(m for c in self.memberships(sp_id) for m in c) - {sp_id}

    def cooperating(self, a: int, b: int) -> bool:
        return any(a in c and b in c for c in self.coalitions)

    def covered(self) -> frozenset[int]:
        return frozenset(m for c in self.coalitions for m in c)

    def singletons(self, players: Sequence[int]) -> tuple[int, ...]:
        covered = self.covered()
        return tuple(m for m in sorted(players) if m not in covered)

    def cooperation_degree(self, sp_id: int) -> int:
        """Partnership slots held by ``sp_id``: sum of (|T| - 1) over its coalitions."""
        return sum(len(c) - 1 for c in self.memberships(sp_id))

    # -- move constructions ----------------------------------------------

    def with_pair(self, a: int, b: int) -> "CoalitionStructure":
        return CoalitionStructure(self.coalitions | {frozenset((a, b))})

    def without_member(self, coalition: frozenset[int], member: int) -> "CoalitionStructure":
        if coalition not in self.coalitions or member not in coalition:
            raise ValueError("not a coalition membership of this structure")
        rest = coalition - {member}
        groups = set(self.coalitions) - {coalition}
        if len(rest) >= 2:
            groups.add(rest)
        return CoalitionStructure(frozenset(groups))

    def break_partner(
        self, coalition: frozenset[int], member: int, partner: int
    ) -> "CoalitionStructure":
        """Remove one partnership inside a coalition of three or more.

        The remainder is covered by the two overlapping cliques that avoid
        the broken pair.
        """
        if coalition not in self.coalitions or member not in coalition:
            raise ValueError("not a coalition membership of this structure")
        if partner == member or partner not in coalition:
            raise ValueError("partner must be another member of the coalition")
        if len(coalition) < 3:
            raise ValueError("breaking a partnership inside a pair is just leaving it")
        groups = set(self.coalitions) - {coalition}
        groups.add(coalition - {member})
        groups.add(coalition - {partner})
        return CoalitionStructure(frozenset(groups))

    # -- presentation ----------------------------------------------------

    def sorted_coalitions(self) -> tuple[tuple[int, ...], ...]:
        return tuple(sorted(tuple(sorted(c)) for c in self.coalitions))

    def serialize(self) -> str:
        inner = ",".join(
            "(" + ",".join(str(m) for m in group) + ")"
            for group in self.sorted_coalitions()
        )
        return "{" + inner + "}"

    @staticmethod
    def parse(text: str) -> "CoalitionStructure":
        stripped = text.strip()
        if not (stripped.startswith("{") and stripped.endswith("}")):
            raise ValueError(f"malformed structure literal: {text!r}")
        body = stripped[1:-1].strip()
        if not body:
            return CoalitionStructure()
        groups = re.findall(r"\(([^()]*)\)", body)
        leftover = re.sub(r"\(([^()]*)\)", "", body).replace(",", "").strip()
        if not groups or leftover:
            raise ValueError(f"malformed structure literal: {text!r}")
        parsed = []
        for group in groups:
            members = [int(tok) for tok in group.split(",") if tok.strip()]
            if not members:
                raise ValueError(f"empty coalition in structure literal: {text!r}")
            parsed.append(members)
        return CoalitionStructure.of(parsed)

    def __str__(self) -> str:  # pragma: no cover - convenience
        return self.serialize()


# Three-provider structures keep the customary omega ordering used by the
# bundled utility-table fixtures: singletons, the three pairs, the three
# two-pair overlaps, then the full triple.
_THREE_PLAYER_ORDER = (
    "{}",
    "{(1,2)}",
    "{(2,3)}",
    "{(1,3)}",
    "{(1,2),(1,3)}",
    "{(1,3),(2,3)}",
    "{(1,2),(2,3)}",
    "{(1,2,3)}",
)


def structure_count_formula(player_count: int) -> int:
    """Closed-form structure count reported for this game family.

    Matches the exhaustive enumeration for up to three providers; beyond
    that the enumeration is authoritative and this number is informational.
    """
    if player_count < 1:
        raise ValueError("player_count must be positive")
    if player_count <= 2:
        return player_count
    return (player_count - 1) ** player_count


def enumerate_structures(
    player_count: int, *, limit: int = ENUMERATION_LIMIT
) -> tuple[CoalitionStructure, ...]:
    """All coalition structures over providers ``1..player_count``.

    Structures correspond one-to-one with cooperation graphs on the provider
    set, enumerated as canonical clique covers.  Deterministic order: fewest
    partnerships first, then lexicographic; the three-provider family uses
    the fixture layout (see ``_THREE_PLAYER_ORDER``).
    """
    if player_count < 1:
        raise ValueError("player_count must be positive")
    if player_count > limit:
        raise ValueError(
            f"enumeration of {player_count} providers exceeds the bound ({limit})"
        )
    if player_count == 3:
        return tuple(CoalitionStructure.parse(s) for s in _THREE_PLAYER_ORDER)
    pairs = [frozenset(p) for p in combinations(range(1, player_count + 1), 2)]
    structures = []
    for r in range(len(pairs) + 1):
        for chosen in combinations(pairs, r):
            structures.append(CoalitionStructure(frozenset(chosen)))
    structures.sort(key=lambda s: (len(_pair_edges(s.coalitions)), s.serialize()))
    return tuple(structures)


def omega_labels(
    structures: Sequence[CoalitionStructure],
) -> dict[CoalitionStructure, str]:
    """Positional names omega1..omegaD following the given order."""
    return {s: f"omega{i}" for i, s in enumerate(structures, start=1)}


class UtilityEvaluator(Protocol):
    """Anything that prices structures: a table or a live simulation."""

    @property
    def players(self) -> tuple[int, ...]: ...

    def shares(self, structure: CoalitionStructure) -> dict[int, float]: ...


@dataclass(frozen=True)
class Move:
    kind: str  # "merge" | "split"
    actor: int
    coalition: tuple[int, ...]  # partnership formed or coalition acted on
    source: CoalitionStructure
    target: CoalitionStructure
    share_before: float
    share_after: float

    def describe(self) -> str:
        group = "(" + ",".join(str(m) for m in self.coalition) + ")"
        return f"SP{self.actor} {self.kind} {group}"


def merge_candidates(
    structure: CoalitionStructure,
    actor: int,
    utilities: UtilityEvaluator,
) -> list[Move]:
    """Admitted pairwise cooperation proposals by ``actor``.

    A proposal may snap shut a larger clique (two-pair overlap plus the
    missing pair becomes the triple), in which case everyone whose coalition
    set changes must consent by not losing utility.
    """
    base = utilities.shares(structure)
    moves: list[Move] = []
    for partner in utilities.players:
        if partner == actor or structure.cooperating(actor, partner):
            continue
        target = structure.with_pair(actor, partner)
        after = utilities.shares(target)
        if not after[actor] > base[actor]:
            continue
        affected = [
            n
            for n in utilities.players
            if n != actor and target.memberships(n) != structure.memberships(n)
        ]
        if any(after[n] < base[n] for n in affected):
            continue
        formed = next(
            c for c in target.coalitions if actor in c and partner in c
        )
        moves.append(
            Move(
                kind="merge",
                actor=actor,
                coalition=tuple(sorted(formed)),
                source=structure,
                target=target,
                share_before=base[actor],
                share_after=after[actor],
            )
        )
    return moves


def split_candidates(
    structure: CoalitionStructure,
    actor: int,
    utilities: UtilityEvaluator,
    *,
    split_rule: str = "strict",
) -> list[Move]:
    """Admitted unilateral withdrawals by ``actor`` (leave or break-partner)."""
    if split_rule not in SPLIT_RULES:
        raise ValueError(f"split_rule must be one of {SPLIT_RULES}")
    base = utilities.shares(structure)
    moves: list[Move] = []
    seen: set[CoalitionStructure] = set()
    for coalition in sorted(structure.memberships(actor), key=lambda c: tuple(sorted(c))):
        targets = [structure.without_member(coalition, actor)]
        if len(coalition) >= 3:
            for partner in sorted(coalition - {actor}):
                targets.append(structure.break_partner(coalition, actor, partner))
        for target in targets:
            if target == structure or target in seen:
                continue
            seen.add(target)
            after = utilities.shares(target)[actor]
            admitted = after > base[actor] if split_rule == "strict" else after >= base[actor]
            if admitted:
                moves.append(
                    Move(
                        kind="split",
                        actor=actor,
                        coalition=tuple(sorted(coalition)),
                        source=structure,
                        target=target,
                        share_before=base[actor],
                        share_after=after,
                    )
                )
    return moves


def _best_move(moves: Sequence[Move]) -> Move | None:
    if not moves:
        return None
    return sorted(moves, key=lambda m: (-m.share_after, m.target.serialize()))[0]


def update_step(
    structure: CoalitionStructure,
    actor: int,
    utilities: UtilityEvaluator,
    *,
    split_rule: str = "strict",
) -> Move | None:
    """Best admitted move of ``actor``: top split vs top merge, split wins ties."""
    best_split = _best_move(split_candidates(structure, actor, utilities, split_rule=split_rule))
    best_merge = _best_move(merge_candidates(structure, actor, utilities))
    if best_split and best_merge:
        return best_split if best_split.share_after >= best_merge.share_after else best_merge
    return best_split or best_merge


def _policy_choice(
    structure: CoalitionStructure,
    actor: int,
    utilities: UtilityEvaluator,
    policy: str,
    rng,
    split_rule: str,
) -> Move | None:
    if policy == "best":
        return update_step(structure, actor, utilities, split_rule=split_rule)
    splits = split_candidates(structure, actor, utilities, split_rule=split_rule)
    merges = merge_candidates(structure, actor, utilities)
    candidates = splits + merges  # splits scanned first: ties defer to withdrawal
    if not candidates:
        return None
    if policy == "first":
        return candidates[0]
    if policy == "random":
        return candidates[rng.randrange(len(candidates))]
    raise ValueError(f"policy must be one of {MOVE_POLICIES}")


def run_coalition_formation(
    utilities: UtilityEvaluator,
    start: CoalitionStructure | None = None,
    *,
    policy: str = "best",
    seed: int = 0,
    split_rule: str = "strict",
) -> tuple[CoalitionStructure, list[Move]]:
    """Round-robin merge-and-split play until no provider can move.

    Providers act in one seeded order, repeated until a full pass is quiet.
    Every accepted move strictly improves its mover (weak splits may hold
    equal), so under a consistent evaluator no structure repeats; a repeat
    raises :class:`CycleError`.
    """
    current = start if start is not None else CoalitionStructure()
    players = list(utilities.players)
    order_rng = substream(seed, "coalition", "sp-order")
    order = order_rng.sample(players, len(players))
    move_rng = substream(seed, "coalition", "moves")
    trajectory: list[Move] = []
    visited = {current}
    while True:
        moved = False
        for actor in order:
            move = _policy_choice(current, actor, utilities, policy, move_rng, split_rule)
            if move is None:
                continue
            current = move.target
            if current in visited:
                raise CycleError(
                    f"structure {current.serialize()} revisited; evaluator inconsistent"
                )
            visited.add(current)
            trajectory.append(move)
            moved = True
        if not moved:
            return current, trajectory


def _all_moves(
    structure: CoalitionStructure,
    utilities: UtilityEvaluator,
    split_rule: str,
) -> list[Move]:
    moves: list[Move] = []
    for actor in utilities.players:
        moves.extend(split_candidates(structure, actor, utilities, split_rule=split_rule))
        moves.extend(merge_candidates(structure, actor, utilities))
    return moves


def stable_set(
    utilities: UtilityEvaluator,
    *,
    split_rule: str = "strict",
) -> frozenset[CoalitionStructure]:
    """Absorbing structures: no provider holds any admitted merge or split."""
    return frozenset(
        s
        for s in enumerate_structures(len(utilities.players))
        if not _all_moves(s, utilities, split_rule)
    )


@dataclass(frozen=True)
class TransitionGraph:
    """Every admitted move between structures, plus the absorbing states."""

    states: tuple[CoalitionStructure, ...]
    moves: tuple[Move, ...]

    def outgoing(self, state: CoalitionStructure) -> tuple[Move, ...]:
        return tuple(m for m in self.moves if m.source == state)

    @property
    def absorbing(self) -> frozenset[CoalitionStructure]:
        with_exit = {m.source for m in self.moves}
        return frozenset(s for s in self.states if s not in with_exit)


def transition_graph(
    utilities: UtilityEvaluator,
    *,
    split_rule: str = "strict",
) -> TransitionGraph:
    states = enumerate_structures(len(utilities.players))
    moves: list[Move] = []
    for state in states:
        moves.extend(_all_moves(state, utilities, split_rule))
    return TransitionGraph(states=states, moves=tuple(moves))


def policy_moves(
    graph: TransitionGraph,
    utilities: UtilityEvaluator,
    policy: str,
    *,
    split_rule: str = "strict",
) -> tuple[Move, ...]:
    """Moves each provider would actually take under one ordering policy.

    ``best`` and ``first`` keep one move per (state, provider); ``random``
    keeps every admitted move, since any of them can be drawn.
    """
    if policy == "random":
        return graph.moves
    chosen: list[Move] = []
    for state in graph.states:
        for actor in utilities.players:
            move = _policy_choice(state, actor, utilities, policy, None, split_rule)
            if move is not None:
                chosen.append(move)
    return tuple(chosen)


def reachable_absorbing(
    graph: TransitionGraph,
    moves: Sequence[Move],
    start: CoalitionStructure,
) -> frozenset[CoalitionStructure]:
    """Absorbing structures reachable from ``start`` along the given moves.

    Closure over all provider orderings: an edge is followed whenever its
    actor could be the one to act.
    """
    frontier = [start]
    seen = {start}
    while frontier:
        state = frontier.pop()
        for move in moves:
            if move.source == state and move.target not in seen:
                seen.add(move.target)
                frontier.append(move.target)
    return frozenset(s for s in seen if s in graph.absorbing)


def transition_to_dot(
    graph: TransitionGraph,
    labels: Mapping[CoalitionStructure, str] | None = None,
    *,
    moves: Sequence[Move] | None = None,
    title: str = "structure transitions",
) -> str:
    """Graphviz rendering; absorbing structures are drawn with two circles."""
    labels = labels or omega_labels(graph.states)
    shown = graph.moves if moves is None else tuple(moves)
    lines = [
        "digraph transitions {",
        f'    label="{title}";',
        "    rankdir=LR;",
        "    node [shape=circle];",
    ]
    for state in graph.states:
        name = labels[state]
        peripheries = 2 if state in graph.absorbing else 1
        lines.append(
            f'    "{name}" [label="{name}\\n{state.serialize()}", peripheries={peripheries}];'
        )
    for move in sorted(
        shown, key=lambda m: (labels[m.source], labels[m.target], m.actor, m.kind)
    ):
        lines.append(
            f'    "{labels[move.source]}" -> "{labels[move.target]}"'
            f' [label="{move.describe()}"];'
        )
    lines.append("}")
    return "\n".join(lines) + "\n"
