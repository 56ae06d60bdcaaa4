"""Utility-table CSV handling and the table-backed structure evaluator.

Schema: header ``structure,phi_1,...,phi_M,phi_total``; the structure column
holds the canonical literal (for example ``{(1,2),(2,3)}``, empty cover
``{}``), phi columns hold each provider's net utility and ``phi_total`` the
row sum.  Row order is preserved and names the structures omega1..omegaD.

Three fixtures covering a three-provider example at cooperation overhead
prices 5, 15 and 35 ship with the package; because utilities are linear in
the overhead price with an integer slot-count slope, the three tables must
agree up to that slope, which :func:`check_cost_linearity` verifies.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .coalitions import CoalitionStructure, enumerate_structures, omega_labels

__all__ = [
    "TableUtilities",
    "LinearityReport",
    "FIXTURES",
    "read_utility_table",
    "write_utility_table",
    "fixture_table",
    "check_cost_linearity",
]

#: shipped fixture name -> (package data file, overhead price per slot)
FIXTURES: dict[str, tuple[str, float]] = {
    "c5": ("tables_c5.csv", 5.0),
    "c15": ("tables_c15.csv", 15.0),
    "c35": ("tables_c35.csv", 35.0),
}

ROW_SUM_TOLERANCE = 0.5


@dataclass(frozen=True)
class TableUtilities:
    """Structure evaluator backed by a utility table (net of overhead)."""

    players: tuple[int, ...]
    rows: tuple[tuple[CoalitionStructure, dict[int, float]], ...]
    totals: tuple[float, ...]
    name: str = "table"

    def __post_init__(self) -> None:
        seen = set()
        for structure, _shares in self.rows:
            if structure in seen:
                raise ValueError(f"duplicate structure row {structure.serialize()}")
            seen.add(structure)

    @property
    def structures(self) -> tuple[CoalitionStructure, ...]:
        return tuple(s for s, _ in self.rows)

    def shares(self, structure: CoalitionStructure) -> dict[int, float]:
        for row_structure, shares in self.rows:
            if row_structure == structure:
                return dict(shares)
        raise KeyError(
            f"structure {structure.serialize()} not present in table {self.name!r}"
        )

    def labels(self) -> dict[CoalitionStructure, str]:
        return omega_labels(self.structures)

    def row_sum_deviations(self) -> tuple[float, ...]:
        """|phi_total - sum(phi_m)| per row, in row order."""
        return tuple(
            abs(total - sum(shares.values()))
            for (_s, shares), total in zip(self.rows, self.totals)
        )

    def require_complete(self) -> None:
        """Every enumerable structure for this provider count must be priced."""
        missing = [
            s.serialize()
            for s in enumerate_structures(len(self.players))
            if s not in set(self.structures)
        ]
        if missing:
            raise ValueError(f"table {self.name!r} lacks structures: {missing}")


def read_utility_table(path: str | Path, *, name: str | None = None) -> TableUtilities:
    path = Path(path)
    with path.open(newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty utility table") from None
        expected_tail = "phi_total"
        if (
            len(header) < 3
            or header[0] != "structure"
            or header[-1] != expected_tail
            or [h for h in header[1:-1]]
            != [f"phi_{i}" for i in range(1, len(header) - 1)]
        ):
            raise ValueError(
                f"{path}: header must be structure,phi_1,...,phi_M,phi_total"
            )
        players = tuple(range(1, len(header) - 1))
        rows = []
        totals = []
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ValueError(f"{path}:{line_no}: wrong column count")
            structure = CoalitionStructure.parse(row[0])
            shares = {m: float(row[m]) for m in players}
            rows.append((structure, shares))
            totals.append(float(row[-1]))
    return TableUtilities(
        players=players,
        rows=tuple(rows),
        totals=tuple(totals),
        name=name or path.stem,
    )


def write_utility_table(
    path: str | Path,
    players: Sequence[int],
    rows: Iterable[tuple[CoalitionStructure, Mapping[int, float]]],
) -> None:
    path = Path(path)
    with path.open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(
            ["structure", *(f"phi_{m}" for m in players), "phi_total"]
        )
        for structure, shares in rows:
            values = [shares[m] for m in players]
            writer.writerow(
                [structure.serialize(), *map(repr, values), repr(sum(values))]
            )


def fixture_table(name: str) -> TableUtilities:
    """Load one shipped fixture by short name (c5, c15 or c35)."""
    try:
        filename, _cost = FIXTURES[name]
    except KeyError:
        raise ValueError(
            f"unknown fixture {name!r}; available: {tuple(sorted(FIXTURES))}"
        ) from None
    source = resources.files("relaygame").joinpath("data", filename)
    with resources.as_file(source) as path:
        return read_utility_table(path, name=name)


def fixture_cost(name: str) -> float:
    return FIXTURES[name][1]


@dataclass(frozen=True)
class LinearityReport:
    """Outcome of the cross-table overhead-price linearity check."""

    ok: bool
    slopes: dict[tuple[str, int], int]  # (structure literal, provider) -> slot count
    mismatches: tuple[str, ...]


def check_cost_linearity(tables: Mapping[float, TableUtilities]) -> LinearityReport:
    """Verify utilities move linearly in the overhead price with integer slope.

    For every structure and provider the slope must equal the provider's
    partnership slot count in that structure, exactly (the tables carry
    decimal values, so no tolerance is needed or given).
    """
    if len(tables) < 2:
        raise ValueError("need at least two tables at different overhead prices")
    prices = sorted(tables)
    base_price = prices[0]
    base = tables[base_price]
    slopes: dict[tuple[str, int], int] = {}
    mismatches: list[str] = []
    for structure in base.structures:
        for m in base.players:
            expected = structure.cooperation_degree(m)
            slopes[(structure.serialize(), m)] = expected
            for price in prices[1:]:
                other = tables[price]
                drop = base.shares(structure)[m] - other.shares(structure)[m]
                want = (price - base_price) * expected
                if not math.isclose(drop, want, rel_tol=0.0, abs_tol=1e-9):
                    mismatches.append(
                        f"{structure.serialize()} provider {m}: "
                        f"drop {drop!r} between prices {base_price} and {price}, "
                        f"expected {want!r} (slope {expected})"
                    )
    return LinearityReport(ok=not mismatches, slopes=slopes, mismatches=tuple(mismatches))
