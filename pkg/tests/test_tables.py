"""Shipped utility matrices: parsing, round-trips, and the price-slope law."""

from __future__ import annotations

import pytest

from relaygame.coalitions import CoalitionStructure, enumerate_structures
from relaygame.tables import (
    FIXTURES,
    TableUtilities,
    check_cost_linearity,
    fixture_cost,
    fixture_table,
    read_utility_table,
    write_utility_table,
)


def test_fixtures_ship_complete_matrices():
    for name in FIXTURES:
        table = fixture_table(name)
        assert table.name == name
        assert table.players == (1, 2, 3)
        assert len(table.rows) == 8
        table.require_complete()
        assert list(table.structures) == list(enumerate_structures(3))


def test_fixture_costs():
    assert fixture_cost("c5") == 5.0
    assert fixture_cost("c15") == 15.0
    assert fixture_cost("c35") == 35.0
    with pytest.raises(ValueError):
        fixture_table("c99")


def test_no_cooperation_row_is_price_independent():
    base = CoalitionStructure()
    rows = {name: fixture_table(name).shares(base) for name in FIXTURES}
    assert rows["c5"] == rows["c15"] == rows["c35"]
    assert rows["c5"] == {1: 390.0, 2: 452.0, 3: 424.0}


def test_row_sums_match_total_column():
    for name in FIXTURES:
        table = fixture_table(name)
        for deviation in table.row_sum_deviations():
            assert deviation <= 0.5


def test_labels_follow_canonical_order():
    labels = fixture_table("c5").labels()
    assert labels[CoalitionStructure.parse("{}")] == "omega1"
    assert labels[CoalitionStructure.parse("{(1,2,3)}")] == "omega8"


def test_unknown_structure_lookup_fails():
    table = fixture_table("c5")
    with pytest.raises(KeyError):
        table.shares(CoalitionStructure.of([(1, 4)]))


def test_write_read_roundtrip(tmp_path):
    table = fixture_table("c15")
    path = tmp_path / "echo.csv"
    write_utility_table(path, table.players, table.rows)
    back = read_utility_table(path)
    assert back.players == table.players
    assert list(back.structures) == list(table.structures)
    for structure in table.structures:
        assert back.shares(structure) == table.shares(structure)


def test_reader_rejects_malformed_headers(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("structure,phi_1,phi_2\n{},1,2\n")
    with pytest.raises(ValueError):
        read_utility_table(bad)
    bad.write_text("shape,phi_1,phi_2,phi_total\n{},1,2,3\n")
    with pytest.raises(ValueError):
        read_utility_table(bad)
    bad.write_text("")
    with pytest.raises(ValueError):
        read_utility_table(bad)


def test_reader_rejects_ragged_rows(tmp_path):
    bad = tmp_path / "ragged.csv"
    bad.write_text("structure,phi_1,phi_2,phi_total\n{},1,2\n")
    with pytest.raises(ValueError):
        read_utility_table(bad)


def test_duplicate_structures_rejected(tmp_path):
    bad = tmp_path / "dupe.csv"
    bad.write_text(
        "structure,phi_1,phi_2,phi_total\n{},1,2,3\n{},4,5,9\n"
    )
    with pytest.raises(ValueError):
        read_utility_table(bad)


def test_price_differences_are_integer_slopes():
    tables = {fixture_cost(name): fixture_table(name) for name in FIXTURES}
    report = check_cost_linearity(tables)
    assert report.ok
    assert report.mismatches == ()
    for (serial, sp), slope in report.slopes.items():
        structure = CoalitionStructure.parse(serial)
        assert slope == sum(len(c) - 1 for c in structure.coalitions if sp in c)


def test_price_slope_mismatch_is_detected(tmp_path):
    table = fixture_table("c5")
    rows = []
    for structure, shares in table.rows:
        tweaked = dict(shares)
        if structure.serialize() == "{(1,2)}":
            tweaked[1] += 0.25  # break the affine relation for one cell
        rows.append((structure, tweaked))
    path = tmp_path / "tweaked.csv"
    write_utility_table(path, table.players, rows)
    tables = {
        5.0: read_utility_table(path, name="c5x"),
        15.0: fixture_table("c15"),
        35.0: fixture_table("c35"),
    }
    report = check_cost_linearity(tables)
    assert not report.ok
    assert report.mismatches
