"""Static world model: providers, devices, base stations, and scenario generation.

Everything downstream (radio arithmetic, network formation, coalition play)
reads from a frozen :class:`Scenario`.  Randomized construction is a pure
function of ``(ScenarioSpec, seed)``: each generation phase draws from its own
labelled substream, so adding or reordering phases never perturbs the others.
"""

from __future__ import annotations

import hashlib
import math
import random
from dataclasses import dataclass, replace
from functools import cached_property
from typing import NamedTuple

ROLE_SOURCE = "source"
ROLE_VACANT = "vacant"

#: evenly spaced stations sit on the horizontal midline at these fractions
_DEFAULT_AREA = (1000.0, 2000.0)  # meters (width, height)


class Node(NamedTuple):
    """Addressable graph vertex: a terminal device ("td") or a base station ("bs")."""

    kind: str
    id: int

    def label(self) -> str:
        return ("TD%d" if self.kind == "td" else "BS%d") % self.id


def td_node(td_id: int) -> Node:
    return Node("td", td_id)


def bs_node(bs_id: int) -> Node:
    return Node("bs", bs_id)


def substream(seed: int, *labels: object) -> random.Random:
    """Independent RNG stream derived from one base seed and a label path.

    Streams are keyed by label rather than draw order; the label string is
    hashed with blake2b so the derivation is stable across platforms and runs.
    """
    text = "/".join(str(part) for part in labels)
    digest = hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest()
    return random.Random((seed << 64) ^ int.from_bytes(digest, "big"))


@dataclass(frozen=True)
class Position:
    """Planar coordinates in meters."""

    x: float
    y: float

    def distance_to(self, other: "Position") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)


@dataclass(frozen=True)
class BaseStation:
    id: int
    position: Position


@dataclass(frozen=True)
class TerminalDevice:
    id: int
    owner: int  # service-provider id
    position: Position
    role: str = ROLE_VACANT
    tx_power: float = 0.01  # watts

    def __post_init__(self) -> None:
        if self.role not in (ROLE_SOURCE, ROLE_VACANT):
            raise ValueError(f"unknown device role {self.role!r}")
        if self.tx_power <= 0:
            raise ValueError("tx_power must be positive")

    @property
    def is_source(self) -> bool:
        return self.role == ROLE_SOURCE


@dataclass(frozen=True)
class ServiceProvider:
    id: int
    td_ids: tuple[int, ...]


@dataclass(frozen=True)
class RadioParams:
    """Channel and admission parameters.

    ``noise_power`` is in watts and ``target_sinr`` is a linear ratio; the
    config layer converts from dBm / dB so the core model never sees units
    other than SI.
    """

    path_loss_exponent: float = 4.0
    antenna_constant: float = 62.5
    noise_power: float = 1e-12  # watts
    target_sinr: float = 10.0  # linear ratio
    packet_info_bits: int = 100
    packet_total_bits: int = 100

    def __post_init__(self) -> None:
        if self.noise_power <= 0:
            raise ValueError("noise_power must be positive")
        if self.path_loss_exponent < 2:
            raise ValueError("path_loss_exponent below the free-space minimum of 2")
        if self.antenna_constant <= 0 or self.target_sinr <= 0:
            raise ValueError("antenna_constant and target_sinr must be positive")
        if self.packet_info_bits <= 0 or self.packet_total_bits < self.packet_info_bits:
            raise ValueError("packet bit counts must satisfy 0 < info <= total")


@dataclass(frozen=True)
class EconomicParams:
    revenue_per_unit_throughput: float = 120.0
    energy_cost_per_watt: float = 500.0
    coalition_cost: float = 5.0  # per partnership slot and period


@dataclass(frozen=True)
class ScenarioSpec:
    """Shape of a random scenario; positions and source picks come from the seed."""

    provider_tds: tuple[int, ...] = (12, 12, 12)
    provider_sources: tuple[int, ...] = (4, 4, 4)
    station_count: int = 2
    station_positions: tuple[Position, ...] | None = None
    area: tuple[float, float] = _DEFAULT_AREA
    tx_power: float = 0.01  # watts, uniform across devices
    radio: RadioParams = RadioParams()
    econ: EconomicParams = EconomicParams()


@dataclass(frozen=True)
class Scenario:
    """Immutable world snapshot consumed by every other module."""

    providers: tuple[ServiceProvider, ...]
    devices: tuple[TerminalDevice, ...]
    stations: tuple[BaseStation, ...]
    radio: RadioParams = RadioParams()
    econ: EconomicParams = EconomicParams()
    area: tuple[float, float] = _DEFAULT_AREA
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if not self.providers:
            raise ValueError("scenario needs at least one service provider")
        if not self.stations:
            raise ValueError("scenario needs at least one base station")
        td_ids = [d.id for d in self.devices]
        if len(set(td_ids)) != len(td_ids):
            raise ValueError("duplicate terminal-device ids")
        if len({b.id for b in self.stations}) != len(self.stations):
            raise ValueError("duplicate base-station ids")
        owned: set[int] = set()
        provider_ids = {p.id for p in self.providers}
        if len(provider_ids) != len(self.providers):
            raise ValueError("duplicate provider ids")
        for p in self.providers:
            if owned & set(p.td_ids):
                raise ValueError("device owned by more than one provider")
            owned.update(p.td_ids)
        if owned != set(td_ids):
            raise ValueError("device ownership must partition the device set")
        for d in self.devices:
            if d.owner not in provider_ids:
                raise ValueError(f"device {d.id} owned by unknown provider {d.owner}")
            if not (0 <= d.position.x <= self.area[0] and 0 <= d.position.y <= self.area[1]):
                raise ValueError(f"device {d.id} outside the scenario area")

    # -- lookups ---------------------------------------------------------

    @cached_property
    def _device_index(self) -> dict[int, TerminalDevice]:
        return {d.id: d for d in self.devices}

    @cached_property
    def _station_index(self) -> dict[int, BaseStation]:
        return {b.id: b for b in self.stations}

    @cached_property
    def _provider_index(self) -> dict[int, ServiceProvider]:
        return {p.id: p for p in self.providers}

    def device(self, td_id: int) -> TerminalDevice:
        return self._device_index[td_id]

    def station(self, bs_id: int) -> BaseStation:
        return self._station_index[bs_id]

    def provider(self, sp_id: int) -> ServiceProvider:
        return self._provider_index[sp_id]

    @property
    def provider_ids(self) -> tuple[int, ...]:
        return tuple(sorted(p.id for p in self.providers))

    def sources(self, sp_id: int | None = None) -> tuple[TerminalDevice, ...]:
        devs = self.devices if sp_id is None else self.devices_of(sp_id)
        return tuple(d for d in devs if d.is_source)

    def vacant_devices(self, sp_id: int | None = None) -> tuple[TerminalDevice, ...]:
        devs = self.devices if sp_id is None else self.devices_of(sp_id)
        return tuple(d for d in devs if not d.is_source)

    def devices_of(self, sp_id: int) -> tuple[TerminalDevice, ...]:
        return tuple(self._device_index[i] for i in self.provider(sp_id).td_ids)

    def node_position(self, node: Node) -> Position:
        if node.kind == "td":
            return self.device(node.id).position
        if node.kind == "bs":
            return self.station(node.id).position
        raise ValueError(f"unknown node kind {node.kind!r}")


def default_station_positions(count: int, area: tuple[float, float]) -> tuple[Position, ...]:
    """Evenly spaced stations along the horizontal midline of the area."""
    width, height = area
    return tuple(
        Position((k - 0.5) * width / count, height / 2.0) for k in range(1, count + 1)
    )


def generate_scenario(spec: ScenarioSpec, seed: int) -> Scenario:
    """Build a random scenario; pure function of ``(spec, seed)``.

    Device ids are global and grouped by provider (provider 1 owns 1..n1,
    provider 2 owns n1+1..n1+n2, ...).  Device positions are uniform over the
    area; source devices are sampled without replacement per provider.
    """
    if len(spec.provider_tds) != len(spec.provider_sources):
        raise ValueError("provider_tds and provider_sources must align")
    if not spec.provider_tds:
        raise ValueError("at least one provider required")
    for n_td, n_src in zip(spec.provider_tds, spec.provider_sources):
        if n_td <= 0:
            raise ValueError("every provider needs at least one device")
        if n_src < 0 or n_src > n_td:
            raise ValueError("source count must be between 0 and the TD count")

    if spec.station_positions is not None:
        stations = tuple(
            BaseStation(i + 1, pos) for i, pos in enumerate(spec.station_positions)
        )
    else:
        if spec.station_count <= 0:
            raise ValueError("station_count must be positive")
        stations = tuple(
            BaseStation(i + 1, pos)
            for i, pos in enumerate(default_station_positions(spec.station_count, spec.area))
        )

    pos_rng = substream(seed, "positions")
    src_rng = substream(seed, "sources")
    width, height = spec.area

    providers: list[ServiceProvider] = []
    devices: list[TerminalDevice] = []
    next_id = 1
    for sp_index, (n_td, n_src) in enumerate(
        zip(spec.provider_tds, spec.provider_sources), start=1
    ):
        td_ids = tuple(range(next_id, next_id + n_td))
        next_id += n_td
        chosen = set(src_rng.sample(td_ids, n_src))
        for td_id in td_ids:
            position = Position(pos_rng.uniform(0, width), pos_rng.uniform(0, height))
            devices.append(
                TerminalDevice(
                    id=td_id,
                    owner=sp_index,
                    position=position,
                    role=ROLE_SOURCE if td_id in chosen else ROLE_VACANT,
                    tx_power=spec.tx_power,
                )
            )
        providers.append(ServiceProvider(sp_index, td_ids))

    return Scenario(
        providers=tuple(providers),
        devices=tuple(devices),
        stations=stations,
        radio=spec.radio,
        econ=spec.econ,
        area=spec.area,
        rng_seed=seed,
    )


def toggle_source(scenario: Scenario, td_id: int) -> Scenario:
    """Flip one device between source and vacant; returns a new scenario."""
    device = scenario.device(td_id)  # raises KeyError for unknown ids
    flipped = replace(
        device, role=ROLE_VACANT if device.is_source else ROLE_SOURCE
    )
    devices = tuple(flipped if d.id == td_id else d for d in scenario.devices)
    return replace(scenario, devices=devices)
