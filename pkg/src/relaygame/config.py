"""JSON run configuration with unit-explicit keys.

The file format keeps human units (dBm, dB, milliwatts, meters); conversion
to the SI/linear quantities of :class:`~relaygame.model.RadioParams` happens
here and nowhere else.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any

from .coalitions import CoalitionStructure
from .model import (
    EconomicParams,
    Position,
    RadioParams,
    Scenario,
    ScenarioSpec,
    generate_scenario,
)

__all__ = [
    "RunConfig",
    "load_config",
    "parse_config",
    "example_config_path",
    "dbm_to_watts",
    "db_to_linear",
]


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


@dataclass(frozen=True)
class RunConfig:
    """Everything a simulation run needs, resolved to model units."""

    spec: ScenarioSpec
    seed: int
    throughput_model: str = "shannon-tdd"
    initial_structure: CoalitionStructure = CoalitionStructure()
    raw: dict | None = None  # verbatim config for report embedding

    def scenario(self, seed: int | None = None) -> Scenario:
        return generate_scenario(self.spec, self.seed if seed is None else seed)


def _require(mapping: dict, key: str, context: str) -> Any:
    if key not in mapping:
        raise ValueError(f"config {context}: missing key {key!r}")
    return mapping[key]


def parse_config(data: dict) -> RunConfig:
    if not isinstance(data, dict):
        raise ValueError("config root must be a JSON object")
    if "seed" not in data:
        raise ValueError("config: a seed is mandatory for reproducible runs")
    seed = int(data["seed"])

    providers = _require(data, "providers", "root")
    if isinstance(providers, dict):
        count = int(_require(providers, "count", "providers"))
        providers = [dict(providers, count=None) for _ in range(count)]
    if not isinstance(providers, list) or not providers:
        raise ValueError("config providers: need a non-empty list")
    td_counts = tuple(int(_require(p, "td_count", "providers[]")) for p in providers)
    src_counts = tuple(
        int(_require(p, "source_count", "providers[]")) for p in providers
    )

    area = tuple(float(v) for v in data.get("area_m", (1000.0, 2000.0)))
    if len(area) != 2 or min(area) <= 0:
        raise ValueError("config area_m: expected [width, height] in meters")

    stations = data.get("stations", {"count": 2})
    station_positions = None
    station_count = 2
    if isinstance(stations, dict):
        station_count = int(_require(stations, "count", "stations"))
    elif isinstance(stations, list):
        station_positions = tuple(
            Position(float(_require(s, "x_m", "stations[]")), float(_require(s, "y_m", "stations[]")))
            for s in stations
        )
    else:
        raise ValueError("config stations: expected a list or {'count': n}")

    radio_cfg = data.get("radio", {})
    radio = RadioParams(
        path_loss_exponent=float(radio_cfg.get("path_loss_exponent", 4.0)),
        antenna_constant=float(radio_cfg.get("antenna_constant", 62.5)),
        noise_power=dbm_to_watts(float(radio_cfg.get("noise_dbm", -90.0))),
        target_sinr=db_to_linear(float(radio_cfg.get("target_sinr_db", 10.0))),
        packet_info_bits=int(radio_cfg.get("packet_info_bits", 100)),
        packet_total_bits=int(radio_cfg.get("packet_total_bits", 100)),
    )

    econ_cfg = data.get("econ", {})
    econ = EconomicParams(
        revenue_per_unit_throughput=float(
            econ_cfg.get("revenue_per_unit_throughput", 120.0)
        ),
        energy_cost_per_watt=float(econ_cfg.get("energy_cost_per_watt", 500.0)),
        coalition_cost=float(econ_cfg.get("coalition_cost", 5.0)),
    )

    device_cfg = data.get("device", {})
    tx_power = float(device_cfg.get("tx_power_mw", 10.0)) / 1000.0

    spec = ScenarioSpec(
        provider_tds=td_counts,
        provider_sources=src_counts,
        station_count=station_count,
        station_positions=station_positions,
        area=area,  # type: ignore[arg-type]
        tx_power=tx_power,
        radio=radio,
        econ=econ,
    )
    initial = CoalitionStructure.parse(data.get("initial_structure", "{}"))
    return RunConfig(
        spec=spec,
        seed=seed,
        throughput_model=str(data.get("throughput_model", "shannon-tdd")),
        initial_structure=initial,
        raw=data,
    )


def load_config(path: str | Path) -> RunConfig:
    with Path(path).open() as handle:
        return parse_config(json.load(handle))


def example_config_path() -> Path:
    """Filesystem path of the bundled example configuration."""
    source = resources.files("relaygame").joinpath("data", "example_scenario.json")
    with resources.as_file(source) as path:
        return Path(path)
