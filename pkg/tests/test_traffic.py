import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from builders import hand_scenario
from strategies import trees
from uavbackhaul.channel import RadioMap
from uavbackhaul.scenario import generate_scenario
from uavbackhaul.topology import BackhaulGraph, delete_link, path_to_gateway, star_topology, subtree
from uavbackhaul.traffic import (aggregate_arrival, evaluate_network, evaluate_path, link_arrivals, link_delay,
                                 link_loads, link_rates, local_arrival, path_delay, path_rate, relayed_packets)

# gateway at the centre; UAVs 1 km apart along x, all within range of each other
CHAIN = [(3000, 2500, 100), (4000, 2500, 100), (2000, 2500, 100)]


def test_link_delay_reference_values():
    assert link_delay(50, 100) == 0.015
    assert link_delay(0, 250) == 1 / 250
    assert link_delay(100, 100) == math.inf
    assert link_delay(101, 100) == math.inf
    assert link_delay(1, 0) == math.inf
    with pytest.raises(ValueError):
        link_delay(-1, 10)


def test_local_arrival():
    s = hand_scenario(CHAIN, loads=[0.3, 0.9, 0.0])
    assert local_arrival(0, s) == pytest.approx(0.3)
    assert local_arrival(1, s) == pytest.approx(0.9)
    assert local_arrival(2, s) == 0.0
    with pytest.raises(ValueError):
        local_arrival(3, s)


def test_local_arrival_sums_multiple_sbs():
    s = generate_scenario(2, 1, 2)
    assert local_arrival(0, s) == pytest.approx(sum(s.traffic.sbs_rates))


def test_aggregate_arrival_chain():
    s = hand_scenario(CHAIN[:2], loads=[1.0, 2.0])
    g = BackhaulGraph((2, 0))  # 1 -> 0 -> gateway
    assert aggregate_arrival(g, 0, s) == 3.0
    assert aggregate_arrival(g, 1, s) == 2.0
    star = star_topology(2)
    assert [aggregate_arrival(star, j, s) for j in range(2)] == [1.0, 2.0]


def test_one_hop_mode_ignores_grandchildren():
    s = hand_scenario(CHAIN, loads=[1.0, 2.0, 4.0])
    g = BackhaulGraph((3, 0, 1))  # 2 -> 1 -> 0 -> gateway
    assert link_arrivals(g, s) == [7.0, 6.0, 4.0]
    assert link_arrivals(g, s.with_options(delta_mode="one_hop")) == [3.0, 6.0, 4.0]


def test_paths_three_hop_additivity():
    s = hand_scenario(CHAIN, loads=[0.7, 0.2, 0.4])
    g = BackhaulGraph((3, 2, 0))  # 1 -> 2 -> 0 -> gateway
    loads = link_loads(g, s)
    ev = evaluate_network(g, s)
    expected_dl = math.fsum(link_delay(loads[k].arrival, loads[k].service_dl) for k in (1, 2, 0))
    expected_ul = math.fsum(link_delay(loads[k].arrival, loads[k].service_ul) for k in (1, 2, 0))
    assert ev[1].delay_dl == pytest.approx(expected_dl, rel=1e-12)
    assert ev[1].delay_ul == pytest.approx(expected_ul, rel=1e-12)
    assert ev[1].rate_dl == min(loads[k].rate_dl for k in (1, 2, 0))
    assert ev[1].relayed_dl == pytest.approx(0.2) and ev[0].relayed_ul == pytest.approx(1.3)
    assert path_delay(g, 0, "dl", s) == ev[0].delay_dl
    assert path_rate(g, 2, "UL", s) == ev[2].rate_ul
    assert relayed_packets(g, 2, "DL", s) == pytest.approx(0.6)
    with pytest.raises(ValueError):
        path_rate(g, 0, "sideways", s)


def test_single_hop_equals_link():
    s = hand_scenario(CHAIN[:1])
    g = star_topology(1)
    ld = link_loads(g, s)[0]
    ev = evaluate_path(g, 0, s)
    assert ev.delay_dl == link_delay(ld.arrival, ld.service_dl)
    assert ev.rate_dl == ld.rate_dl and ev.rate_ul == ld.rate_ul  # no interferers: DL = UL


def test_disconnected_uav():
    s = hand_scenario(CHAIN)
    g = BackhaulGraph((None, 0, 3))
    for j in (0, 1):
        ev = evaluate_path(g, j, s)
        assert ev.delay_dl == ev.delay_ul == math.inf
        assert ev.rate_dl == ev.rate_ul == 0 and ev.relayed_dl == ev.relayed_ul == 0


def test_overloaded_link_zeroes_relayed_packets():
    s = hand_scenario(CHAIN[:2], loads=[1e5, 10.0])  # far above any link service rate
    g = BackhaulGraph((2, 0))
    ev = evaluate_network(g, s)
    assert ev[1].delay_dl == math.inf and ev[1].relayed_dl == 0.0


def test_gateway_uplink_interference():
    s = hand_scenario(CHAIN)
    g = star_topology(3)
    dl, ul = link_rates(g, s, RadioMap(s))
    assert all(u < d for d, u in zip(dl, ul))
    quiet = s.with_options(interference=False)
    dl2, ul2 = link_rates(g, quiet, RadioMap(quiet))
    assert dl2 == ul2 == dl


def test_band_fractions_scale_rates():
    s = hand_scenario(CHAIN[:2])
    half = s.with_options(dl_band_fraction=0.5)
    g = BackhaulGraph((2, 0))
    dl, ul = link_rates(g, s, RadioMap(s))
    dl2, ul2 = link_rates(g, half, RadioMap(half))
    assert dl2 == pytest.approx([x / 2 for x in dl]) and ul2 == ul


@given(trees(max_uavs=12), st.integers(0, 1000))
def test_path_rate_never_exceeds_links(parent, seed):
    g = BackhaulGraph(parent)
    s = generate_scenario(seed, g.num_uavs, 2 * g.num_uavs)
    loads = link_loads(g, s)
    ev = evaluate_network(g, s)
    mu_max = max(max(l.service_dl, l.service_ul) for l in loads.values())
    for j in range(g.num_uavs):
        path = path_to_gateway(g, j)
        hops = [loads[k] for k in path[:-1]]
        assert all(ev[j].rate_dl <= h.rate_dl and ev[j].rate_ul <= h.rate_ul for h in hops)
        assert ev[j].delay_dl >= len(hops) / mu_max


@given(trees(min_uavs=2, max_uavs=12), st.integers(0, 1000), st.data())
def test_adding_descendant_never_reduces_load_or_delay(parent, seed, data):
    g = BackhaulGraph(parent)
    s = generate_scenario(seed, g.num_uavs, 2 * g.num_uavs, rate_scale=50.0)
    leafless = delete_link(g, *data.draw(st.sampled_from(sorted(tuple(e) for e in g.edges))))
    before, after = link_arrivals(leafless, s), link_arrivals(g, s)
    ev_before, ev_after = evaluate_network(leafless, s), evaluate_network(g, s)
    for j in range(g.num_uavs):
        assert after[j] >= before[j]
        if ev_before[j].delay_dl < math.inf and path_to_gateway(leafless, j):
            # j's path in the smaller graph is still j's path in the full graph
            assert ev_after[j].delay_dl >= ev_before[j].delay_dl * (1 - 1e-12)


@given(trees(max_uavs=15), st.integers(0, 1000))
def test_psi_is_subtree_sum(parent, seed):
    g = BackhaulGraph(parent)
    s = generate_scenario(seed, g.num_uavs, 2 * g.num_uavs)
    psi = link_arrivals(g, s)
    lam = s.local_arrivals()
    for j in range(g.num_uavs):
        assert psi[j] == pytest.approx(math.fsum(lam[i] for i in subtree(g, j)), rel=1e-12)
