"""Channel math, admissibility, throughput models, and energy accounting."""

from __future__ import annotations

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from relaygame import linkgame
from relaygame.model import ROLE_SOURCE, ROLE_VACANT, bs_node, td_node
from relaygame.radio import (
    PacketSuccess,
    RelayPath,
    ShannonTdd,
    available_models,
    is_admissible,
    link_snr,
    path_throughput,
    register_model,
    resolve_model,
    td_energy_cost,
)

from conftest import make_scenario

# Hand-computed from beta*Q/(d^n*N0) with beta=62.5, Q=10 mW, n=4, N0=1e-12 W.
SNR_AT_500M = 10.0
SNR_AT_250M = 160.0
SNR_AT_800M = 1.52587890625
RATE_DIRECT_500M = 3.4594316186372973  # log2(1 + 10)
RATE_TWO_HOPS_250M = 3.6654584390573084  # log2(1 + 160) / 2
RATE_DIRECT_800M = 1.336785476203755
PACKET_RATE_500M = 0.9996128633855116  # (1 - 0.5*erfc(sqrt(10)))**100


def one_source_at(distance: float, *, relay_at: float | None = None):
    devices = [(1, 1, 100.0 + distance, 1000.0, ROLE_SOURCE)]
    if relay_at is not None:
        devices.append((2, 1, 100.0 + relay_at, 1000.0, ROLE_VACANT))
    return make_scenario(stations=[(100.0, 1000.0)], devices=devices)


def test_snr_matches_hand_computation():
    assert link_snr(one_source_at(500.0), 1, bs_node(1)) == pytest.approx(
        SNR_AT_500M, abs=1e-12
    )
    assert link_snr(one_source_at(250.0), 1, bs_node(1)) == pytest.approx(
        SNR_AT_250M, abs=1e-9
    )
    assert link_snr(one_source_at(800.0), 1, bs_node(1)) == pytest.approx(
        SNR_AT_800M, abs=1e-9
    )


def test_snr_between_devices():
    s = one_source_at(800.0, relay_at=400.0)
    assert link_snr(s, 1, td_node(2)) == pytest.approx(24.4140625, abs=1e-9)


def test_colocated_nodes_rejected():
    s = make_scenario(
        stations=[(100.0, 1000.0)],
        devices=[
            (1, 1, 600.0, 1000.0, ROLE_SOURCE),
            (2, 1, 600.0, 1000.0, ROLE_VACANT),
        ],
    )
    with pytest.raises(ValueError):
        link_snr(s, 1, td_node(2))


def test_admissibility_boundary_at_500m():
    assert is_admissible(one_source_at(500.0), 1, bs_node(1))
    assert not is_admissible(one_source_at(500.0 + 1e-6), 1, bs_node(1))
    assert is_admissible(one_source_at(499.999999), 1, bs_node(1))


def test_shannon_rate_single_hop():
    s = one_source_at(500.0)
    path = RelayPath(source=1, hops=(), station=1)
    assert ShannonTdd().path_rate(s, path) == pytest.approx(
        RATE_DIRECT_500M, abs=1e-12
    )


def test_shannon_rate_splits_airtime_across_hops():
    s = make_scenario(
        stations=[(100.0, 1000.0)],
        devices=[
            (1, 1, 600.0, 1000.0, ROLE_SOURCE),
            (2, 1, 350.0, 1000.0, ROLE_VACANT),
        ],
    )
    path = RelayPath(source=1, hops=(2,), station=1)
    assert ShannonTdd().path_rate(s, path) == pytest.approx(
        RATE_TWO_HOPS_250M, abs=1e-12
    )


def test_packet_model_single_hop():
    s = one_source_at(500.0)
    path = RelayPath(source=1, hops=(), station=1)
    assert PacketSuccess().path_rate(s, path) == pytest.approx(
        PACKET_RATE_500M, abs=1e-12
    )


def test_packet_model_overhead_and_hops_scale_down():
    s = one_source_at(250.0)
    direct = PacketSuccess().path_rate(s, RelayPath(source=1, hops=(), station=1))
    # with 250 m hops the per-packet success is ~1, so the rate is ~info/total
    assert direct == pytest.approx(1.0, abs=1e-20)


def test_path_throughput_rejects_weak_relay_hop():
    s = one_source_at(800.0, relay_at=200.0)  # 600 m between the devices
    with pytest.raises(ValueError):
        path_throughput(s, RelayPath(source=1, hops=(2,), station=1))


def test_path_throughput_allows_any_station_hop():
    # 800 m to the station is far below the admission ratio, but direct
    # attachment is the guaranteed fallback and must always evaluate.
    s = one_source_at(800.0)
    rate = path_throughput(s, RelayPath(source=1, hops=(), station=1))
    assert rate == pytest.approx(RATE_DIRECT_800M, abs=1e-12)


def test_relay_path_rejects_revisits():
    with pytest.raises(ValueError):
        RelayPath(source=1, hops=(1,), station=1)


def test_resolve_model():
    assert resolve_model(None).name == "shannon-tdd"
    assert resolve_model("packet-success").name == "packet-success"
    model = ShannonTdd()
    assert resolve_model(model) is model
    with pytest.raises(ValueError):
        resolve_model("warp-drive")


def test_register_model_roundtrip():
    class Flat:
        name = "flat-test"

        def path_rate(self, scenario, path):
            return 1.0

    register_model(Flat())
    assert "flat-test" in available_models()
    assert resolve_model("flat-test").path_rate(None, None) == 1.0


def test_energy_cost_counts_active_devices_only():
    s = make_scenario(
        stations=[(100.0, 1000.0)],
        devices=[
            (1, 1, 300.0, 1000.0, ROLE_SOURCE),
            (2, 1, 400.0, 1000.0, ROLE_SOURCE),
            (3, 1, 500.0, 1000.0, ROLE_SOURCE),
            (4, 1, 600.0, 1000.0, ROLE_SOURCE),
            (5, 1, 200.0, 1000.0, ROLE_VACANT),  # idle: free
        ],
    )
    graph = linkgame.initial_star(s)
    # four transmitting devices at 10 mW, billed 500 per watt
    assert td_energy_cost(s, graph, 1) == pytest.approx(20.0, abs=1e-12)


def test_energy_cost_bills_serving_relays():
    s = one_source_at(800.0, relay_at=400.0)
    graph = linkgame.initial_star(s)
    assert td_energy_cost(s, graph, 1) == pytest.approx(5.0)
    graph.drop_link(1)
    graph.set_link(2, bs_node(1))
    graph.set_link(1, td_node(2))
    assert td_energy_cost(s, graph, 1) == pytest.approx(10.0)


@settings(max_examples=40, deadline=None)
@given(
    near=st.floats(min_value=1.0, max_value=1999.0),
    extra=st.floats(min_value=0.5, max_value=1800.0),
)
def test_snr_strictly_decreases_with_distance(near, extra):
    far = min(near + extra, 1900.0)
    if far <= near:
        return
    assert link_snr(one_source_at(near), 1, bs_node(1)) > link_snr(
        one_source_at(far), 1, bs_node(1)
    )
