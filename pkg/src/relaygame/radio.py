"""Radio link arithmetic: SNR, admission, path throughput, energy cost.

The channel is noise limited.  For transmit power ``Q`` (watts), distance
``d`` (meters), path-loss exponent ``n``, antenna constant ``beta`` and noise
power ``N0`` (watts) the received SNR of a link is::

    snr = beta * Q / (d ** n * N0)

A device-to-device link is admissible when its SNR reaches the target ratio.
Links into a base station are always permitted as the fallback attachment, so
admission is only enforced for relay hops.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Protocol

from .model import Node, Scenario, bs_node

__all__ = [
    "Link",
    "RelayPath",
    "ThroughputModel",
    "link_snr",
    "is_admissible",
    "path_throughput",
    "td_energy_cost",
    "resolve_model",
    "register_model",
    "available_models",
]


@dataclass(frozen=True)
class Link:
    sender: int  # transmitting TD id
    receiver: Node

    def endpoints(self) -> tuple[Node, Node]:
        return Node("td", self.sender), self.receiver


@dataclass(frozen=True)
class RelayPath:
    """One flow: a source device, zero or more relay hops, a terminal station."""

    source: int
    hops: tuple[int, ...]
    station: int

    def __post_init__(self) -> None:
        seen = {self.source, *self.hops}
        if len(seen) != len(self.hops) + 1:
            raise ValueError("relay path revisits a device")

    @property
    def links(self) -> tuple[Link, ...]:
        chain = (self.source, *self.hops)
        out = [Link(a, Node("td", b)) for a, b in zip(chain, chain[1:])]
        out.append(Link(chain[-1], bs_node(self.station)))
        return tuple(out)

    @property
    def hop_count(self) -> int:
        """Number of transmissions needed to move one unit end to end."""
        return len(self.hops) + 1


def link_snr(scenario: Scenario, sender: int, receiver: Node) -> float:
    """Received SNR (linear) of the link from device ``sender`` to ``receiver``."""
    device = scenario.device(sender)
    distance = device.position.distance_to(scenario.node_position(receiver))
    if distance <= 0.0:
        raise ValueError(
            f"degenerate geometry: TD{sender} and {receiver.label()} are colocated"
        )
    radio = scenario.radio
    return (
        radio.antenna_constant
        * device.tx_power
        / (distance**radio.path_loss_exponent * radio.noise_power)
    )


def is_admissible(scenario: Scenario, sender: int, receiver: Node) -> bool:
    """True when the link meets the target SNR ratio."""
    return link_snr(scenario, sender, receiver) >= scenario.radio.target_sinr


class ThroughputModel(Protocol):
    """Pluggable end-to-end rate model; rates are in normalized units."""

    name: str

    def path_rate(self, scenario: Scenario, path: RelayPath) -> float: ...


def _link_snrs(scenario: Scenario, path: RelayPath) -> list[float]:
    return [link_snr(scenario, link.sender, link.receiver) for link in path.links]


@dataclass(frozen=True)
class ShannonTdd:
    """Shannon rate of the weakest link, time-shared across the hops.

    Every hop occupies one equal slot of the frame, so an ``h``-hop flow keeps
    ``1/h`` of the airtime at the spectral efficiency of its bottleneck link.
    """

    name: str = "shannon-tdd"

    def path_rate(self, scenario: Scenario, path: RelayPath) -> float:
        snrs = _link_snrs(scenario, path)
        return math.log2(1.0 + min(snrs)) / path.hop_count


@dataclass(frozen=True)
class PacketSuccess:
    """Goodput of a stop-and-wait packet flow over binary signalling.

    Per-link packet success is ``(1 - ber)**L`` with ``L`` the payload bits
    and ``ber = erfc(sqrt(snr)) / 2``; the flow delivers the product of its
    link successes, scaled by payload efficiency and the TDD share.
    """

    name: str = "packet-success"

    def path_rate(self, scenario: Scenario, path: RelayPath) -> float:
        radio = scenario.radio
        info = radio.packet_info_bits
        success = 1.0
        for snr in _link_snrs(scenario, path):
            ber = 0.5 * math.erfc(math.sqrt(snr))
            success *= (1.0 - ber) ** info
        efficiency = info / radio.packet_total_bits
        return efficiency * success / path.hop_count


_MODELS: dict[str, ThroughputModel] = {}


def register_model(model: ThroughputModel) -> None:
    _MODELS[model.name] = model


def available_models() -> tuple[str, ...]:
    return tuple(sorted(_MODELS))


def resolve_model(model: ThroughputModel | str | None) -> ThroughputModel:
    if model is None:
        model = "shannon-tdd"
    if isinstance(model, str):
        try:
            return _MODELS[model]
        except KeyError:
            raise ValueError(
                f"unknown throughput model {model!r}; available: {available_models()}"
            ) from None
    return model


register_model(ShannonTdd())
register_model(PacketSuccess())


def path_throughput(
    scenario: Scenario,
    path: RelayPath,
    model: ThroughputModel | str | None = None,
) -> float:
    """End-to-end throughput of one flow.

    Relay hops must be admissible; the terminal station link is exempt because
    direct attachment is always available as a fallback, whatever its SNR.
    """
    for link in path.links:
        if link.receiver.kind == "td" and not is_admissible(
            scenario, link.sender, link.receiver
        ):
            raise ValueError(
                f"inadmissible relay link TD{link.sender}->{link.receiver.label()}"
            )
    return resolve_model(model).path_rate(scenario, path)


def td_energy_cost(scenario: Scenario, graph, sp_id: int) -> float:
    """Energy expenditure of one provider's actively transmitting devices.

    ``graph`` is any object exposing ``edges()`` (transmitter id, target node)
    and ``feeder_of(td_id)``; a device is active when it holds a link and is
    either a source or currently relaying a flow.
    """
    price = scenario.econ.energy_cost_per_watt
    total = 0.0
    for td_id, _target in graph.edges():
        device = scenario.device(td_id)
        if device.owner != sp_id:
            continue
        if device.is_source or graph.feeder_of(td_id) is not None:
            total += price * device.tx_power
    return total
