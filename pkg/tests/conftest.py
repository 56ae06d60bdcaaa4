"""Shared builders for hand-placed test scenarios."""

from __future__ import annotations

import pytest

from relaygame.model import (
    ROLE_SOURCE,
    ROLE_VACANT,
    BaseStation,
    EconomicParams,
    Position,
    RadioParams,
    Scenario,
    ServiceProvider,
    TerminalDevice,
)


def make_scenario(
    stations: list[tuple[float, float]],
    devices: list[tuple[int, int, float, float, str]],
    *,
    area: tuple[float, float] = (2000.0, 2000.0),
    seed: int = 0,
    econ: EconomicParams | None = None,
    radio: RadioParams | None = None,
) -> Scenario:
    """Build a scenario from (td_id, owner, x, y, role) rows and BS coordinates."""
    owners: dict[int, list[int]] = {}
    tds = []
    for td_id, owner, x, y, role in devices:
        owners.setdefault(owner, []).append(td_id)
        tds.append(
            TerminalDevice(
                id=td_id, owner=owner, position=Position(x, y), role=role
            )
        )
    providers = [
        ServiceProvider(id=sp, td_ids=tuple(ids)) for sp, ids in sorted(owners.items())
    ]
    return Scenario(
        providers=tuple(providers),
        devices=tuple(tds),
        stations=tuple(
            BaseStation(id=i + 1, position=Position(x, y))
            for i, (x, y) in enumerate(stations)
        ),
        radio=radio or RadioParams(),
        econ=econ or EconomicParams(),
        area=area,
        rng_seed=seed,
    )


@pytest.fixture
def scenario_factory():
    return make_scenario


def line_world() -> Scenario:
    """One station, one far source, one midway relay of the same provider.

    Geometry: station at x=100, source 800 m out, relay 400 m out on the same
    axis.  Direct rate log2(1 + 1.52587890625) = 1.336785476203755; relayed
    rate log2(1 + 24.4140625)/2 = 2.333777553520566, so relaying wins.
    """
    return make_scenario(
        stations=[(100.0, 1000.0)],
        devices=[
            (1, 1, 900.0, 1000.0, ROLE_SOURCE),
            (2, 1, 500.0, 1000.0, ROLE_VACANT),
        ],
    )


@pytest.fixture
def relay_pays_off():
    return line_world()
